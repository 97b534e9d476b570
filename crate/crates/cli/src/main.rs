use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod model_file;

/// Exit codes: 0 success, 2 invalid input, 3 numerical failure,
/// 4 statistical verification failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Statistical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Statistical(_) => 4,
        }
    }
}

impl From<msglass::Error> for CliError {
    fn from(e: msglass::Error) -> Self {
        match e {
            msglass::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "msglass",
    version,
    about = "Pure multi-species spherical spin glass solver"
)]
struct Cli {
    /// Print machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical overlap, beta_c and ground-state energy.
    Critical {
        /// Model file, or inline JSON starting with '{'.
        #[arg(long)]
        model: String,
    },
    /// Overlap and free energy at one inverse temperature.
    Solve {
        #[arg(long)]
        model: String,
        #[arg(long)]
        beta: f64,
    },
    /// Phase-diagram table on a uniform beta grid, as CSV.
    Sweep {
        #[arg(long)]
        model: String,
        #[arg(long)]
        beta_min: f64,
        #[arg(long)]
        beta_max: f64,
        #[arg(long)]
        steps: usize,
        /// Output path; stdout if omitted.
        #[arg(long)]
        out: Option<String>,
    },
    /// Closed forms for the two-species p = (1, 1) model.
    Bipartite {
        #[arg(long)]
        lambda_s: f64,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Finite-N Monte Carlo checks.
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Subcommand)]
enum Verify {
    /// E[H(σ)H(σ')] against N·ξ(R).
    Covariance {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Top singular value of a rectangular Gaussian matrix against the edge limit.
    Wishart {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda_s: f64,
        /// Independent draws averaged into the estimate. A single draw
        /// fluctuates on the n^(-2/3) edge scale, wider than the envelope.
        #[arg(long, default_value_t = 10)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Projected gradient ascent against E★.
    Groundstate {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 150)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Free energy deep in the high-temperature phase against ½β².
    Smallbeta {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Critical { model } => {
            let m = model_file::load_model(&model)?;
            commands::print_critical(&commands::critical(&m)?, json)
        }
        Command::Solve { model, beta } => {
            let m = model_file::load_model(&model)?;
            let solver = commands::Solver::for_model(&m)?;
            commands::print_point(&commands::point(&m, &solver, beta)?, json)
        }
        Command::Sweep {
            model,
            beta_min,
            beta_max,
            steps,
            out,
        } => {
            let m = model_file::load_model(&model)?;
            commands::sweep(&m, beta_min, beta_max, steps, out.as_deref())
        }
        Command::Bipartite { lambda_s, beta } => {
            commands::print_bipartite(&commands::bipartite(lambda_s, beta)?, json)
        }
        Command::Verify(v) => {
            let check = match v {
                Verify::Covariance {
                    model,
                    n,
                    trials,
                    pairs,
                    seed,
                } => {
                    let m = model_file::load_model(&model)?;
                    commands::verify_covariance(&m, n, trials, pairs, seed)?
                }
                Verify::Wishart {
                    n,
                    lambda_s,
                    replicas,
                    seed,
                } => commands::verify_wishart(n, lambda_s, replicas, seed)?,
                Verify::Groundstate {
                    model,
                    n,
                    restarts,
                    seed,
                } => {
                    let m = model_file::load_model(&model)?;
                    commands::verify_groundstate(&m, n, restarts, seed)?
                }
                Verify::Smallbeta {
                    model,
                    n,
                    beta,
                    samples,
                    seed,
                } => {
                    let m = model_file::load_model(&model)?;
                    commands::verify_small_beta(&m, n, beta, samples, seed)?
                }
            };
            commands::print_check(&check, json)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MSGLASS_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
