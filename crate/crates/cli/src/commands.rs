use std::fs::File;
use std::io::{self, BufWriter, Write};

use msglass::critical::{critical_residuals, overlap_system_residuals};
use msglass::mcverify::{
    covariance_check, gradient_ascent_ground_state, replica_seed, small_beta_free_energy,
    species_sizes, wishart_ground_state,
};
use msglass::{solve_critical, solve_supercritical, BipartiteModel, CriticalPoint, ModelSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

/// The solver a model is routed to. `|p| = 2` never reaches the general
/// critical solver.
pub enum Solver {
    General(CriticalPoint),
    Bipartite(BipartiteModel),
}

impl Solver {
    pub fn for_model(model: &ModelSpec) -> Result<Self, CliError> {
        if model.is_bipartite() {
            log::debug!("routing to the bipartite closed forms");
            return Ok(Solver::Bipartite(BipartiteModel::from_spec(model)?));
        }
        Ok(Solver::General(solve_critical(model)?))
    }

    pub fn beta_c(&self) -> f64 {
        match self {
            Solver::General(cp) => cp.beta_c,
            Solver::Bipartite(b) => b.beta_c(),
        }
    }

    pub fn e_star(&self) -> f64 {
        match self {
            Solver::General(cp) => cp.e_star,
            Solver::Bipartite(b) => b.e_star(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CriticalReport {
    pub route: &'static str,
    pub species: Vec<String>,
    pub q_c: Vec<f64>,
    pub beta_c: f64,
    pub e_star: f64,
    pub phi_qc: f64,
    pub max_residual: f64,
}

pub fn critical(model: &ModelSpec) -> Result<CriticalReport, CliError> {
    let species = model.species().to_vec();
    match Solver::for_model(model)? {
        Solver::General(cp) => {
            let stationarity = critical_residuals(model, cp.beta_c, &cp.q_c, cp.e_star)?.max();
            let overlap = overlap_system_residuals(model, &cp.q_c)?
                .into_iter()
                .fold(0.0f64, f64::max);
            Ok(CriticalReport {
                route: "general",
                species,
                q_c: cp.q_c.0.clone(),
                beta_c: cp.beta_c,
                e_star: cp.e_star,
                phi_qc: cp.phi_qc,
                max_residual: stationarity.max(overlap),
            })
        }
        Solver::Bipartite(b) => Ok(bipartite_report(&b, species)),
    }
}

fn bipartite_report(b: &BipartiteModel, species: Vec<String>) -> CriticalReport {
    CriticalReport {
        route: "bipartite",
        species,
        q_c: vec![0.0, 0.0],
        beta_c: b.beta_c(),
        e_star: b.e_star(),
        phi_qc: 0.0,
        max_residual: b.kappa(b.beta_c()).0.abs(),
    }
}

pub fn print_critical(r: &CriticalReport, json: bool) -> Result<(), CliError> {
    if json {
        return print_json(r);
    }
    println!("route         {}", r.route);
    println!("beta_c        {}", r.beta_c);
    println!("e_star        {}", r.e_star);
    println!("phi_qc        {}", r.phi_qc);
    for (label, q) in r.species.iter().zip(&r.q_c) {
        println!(
            "q_c[{label}]{:pad$}{q}",
            "",
            pad = 9usize.saturating_sub(label.len())
        );
    }
    println!("max_residual  {:e}", r.max_residual);
    Ok(())
}

/// One point of the phase diagram.
#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub beta: f64,
    pub beta_c: f64,
    pub supercritical: bool,
    pub y_star: Option<f64>,
    pub free_energy: f64,
    pub xi_q_one: f64,
    pub species: Vec<String>,
    pub q: Vec<f64>,
}

pub fn point(model: &ModelSpec, solver: &Solver, beta: f64) -> Result<Point, CliError> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(CliError::Input(format!(
            "beta: must be finite and >= 0, got {beta}"
        )));
    }
    let beta_c = solver.beta_c();
    let mut out = Point {
        beta,
        beta_c,
        supercritical: false,
        y_star: None,
        free_energy: 0.5 * beta * beta,
        xi_q_one: 1.0,
        species: model.species().to_vec(),
        q: vec![0.0; model.num_species()],
    };
    if beta <= beta_c {
        return Ok(out);
    }
    out.supercritical = true;
    match solver {
        Solver::General(cp) => {
            let sol = solve_supercritical(model, cp, beta)?;
            out.y_star = Some(sol.y_star);
            out.free_energy = sol.free_energy;
            out.xi_q_one = sol.xi_q_one;
            out.q = sol.q.into_inner();
        }
        Solver::Bipartite(b) => {
            let ov = b.overlap(beta);
            out.q = vec![ov.q_s, ov.q_t];
            out.y_star = Some(beta * (ov.q_s * ov.q_t).sqrt());
            out.free_energy = b.free_energy(beta);
            out.xi_q_one = model.xi_q_at_one(&out.q)?;
        }
    }
    Ok(out)
}

pub fn print_point(p: &Point, json: bool) -> Result<(), CliError> {
    if json {
        return print_json(p);
    }
    let regime = if p.supercritical {
        "supercritical"
    } else {
        "subcritical"
    };
    println!("beta      {}", p.beta);
    println!("beta_c    {} ({regime})", p.beta_c);
    match p.y_star {
        Some(y) => println!("y_star    {y}"),
        None => println!("y_star    -"),
    }
    println!("F         {}", p.free_energy);
    println!("xi_q_one  {}", p.xi_q_one);
    for (label, q) in p.species.iter().zip(&p.q) {
        println!(
            "q[{label}]{:pad$}{q}",
            "",
            pad = 7usize.saturating_sub(label.len())
        );
    }
    Ok(())
}

pub fn sweep(
    model: &ModelSpec,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
    out: Option<&str>,
) -> Result<(), CliError> {
    if !(beta_min >= 0.0 && beta_min < beta_max && beta_max.is_finite()) {
        return Err(CliError::Input(format!(
            "beta-min/beta-max: need 0 <= beta_min < beta_max, got [{beta_min}, {beta_max}]"
        )));
    }
    if steps < 2 {
        return Err(CliError::Input(format!(
            "steps: need at least 2, got {steps}"
        )));
    }
    let solver = Solver::for_model(model)?;
    let width = beta_max - beta_min;
    let last = (steps - 1) as f64;
    let rows = (0..steps)
        .into_par_iter()
        .map(|i| {
            let beta = if i + 1 == steps {
                beta_max
            } else {
                beta_min + width * (i as f64 / last)
            };
            point(model, &solver, beta).map(|p| csv_row(&p))
        })
        .collect::<Result<Vec<String>, CliError>>()?;

    let mut header = String::from("beta,y_star,F,xi_q_one");
    for label in model.species() {
        header.push_str(",q_");
        header.push_str(label);
    }

    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(
            File::create(path)
                .map_err(|e| CliError::Input(format!("out: cannot create {path}: {e}")))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let write_err = |e: io::Error| CliError::Input(format!("out: write failed: {e}"));
    writeln!(w, "{header}").map_err(write_err)?;
    for row in rows {
        writeln!(w, "{row}").map_err(write_err)?;
    }
    w.flush().map_err(write_err)?;
    log::info!("wrote {steps} rows");
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(p: &Point) -> String {
    let mut fields = vec![
        fmt(p.beta),
        p.y_star.map(fmt).unwrap_or_default(),
        fmt(p.free_energy),
        fmt(p.xi_q_one),
    ];
    fields.extend(p.q.iter().map(|&q| fmt(q)));
    fields.join(",")
}

#[derive(Debug, Serialize)]
pub struct BipartiteReport {
    #[serde(flatten)]
    pub critical: CriticalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Point>,
}

pub fn bipartite(lambda_s: f64, beta: Option<f64>) -> Result<BipartiteReport, CliError> {
    let b = BipartiteModel::new(lambda_s, 1.0 - lambda_s)
        .map_err(|e| CliError::Input(format!("lambda-s: {e}")))?;
    let spec = b.to_spec();
    let critical = bipartite_report(&b, spec.species().to_vec());
    let point = beta
        .map(|beta| point(&spec, &Solver::Bipartite(b), beta))
        .transpose()?;
    Ok(BipartiteReport { critical, point })
}

pub fn print_bipartite(r: &BipartiteReport, json: bool) -> Result<(), CliError> {
    if json {
        return print_json(r);
    }
    print_critical(&r.critical, false)?;
    if let Some(p) = &r.point {
        println!();
        print_point(p, false)?;
    }
    Ok(())
}

/// Outcome of one verification check.
#[derive(Debug, Serialize)]
pub struct Check {
    pub check: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub expected: f64,
    pub lower: f64,
    pub upper: f64,
    pub detail: Vec<String>,
}

impl Check {
    fn within(check: &'static str, observed: f64, expected: f64, lower: f64, upper: f64) -> Self {
        Check {
            check,
            passed: observed >= lower && observed <= upper,
            observed,
            expected,
            lower,
            upper,
            detail: Vec::new(),
        }
    }
}

pub fn print_check(c: &Check, json: bool) -> Result<(), CliError> {
    if json {
        print_json(c)?;
    } else {
        for line in &c.detail {
            println!("  {line}");
        }
        println!(
            "{} {}: observed {} expected {} accepted [{}, {}]",
            if c.passed { "PASS" } else { "FAIL" },
            c.check,
            c.observed,
            c.expected,
            c.lower,
            c.upper
        );
    }
    if c.passed {
        Ok(())
    } else {
        Err(CliError::Statistical(format!("{} check failed", c.check)))
    }
}

pub fn verify_covariance(
    model: &ModelSpec,
    n: usize,
    trials: usize,
    pairs: usize,
    seed: u64,
) -> Result<Check, CliError> {
    const SIGMAS: f64 = 5.0;
    let sizes = species_sizes(model, n)?;
    let report = covariance_check(model, &sizes, trials, pairs, seed)?;
    let mut c = Check::within("covariance", report.max_abs_z, 0.0, 0.0, SIGMAS);
    c.detail = report
        .pairs
        .iter()
        .map(|p| {
            format!(
                "R = {:?}: mean {:.6} target {:.6} stderr {:.6} z {:+.3}",
                p.overlap, p.mean, p.target, p.std_error, p.z_score
            )
        })
        .collect();
    Ok(c)
}

pub fn verify_wishart(
    n: usize,
    lambda_s: f64,
    replicas: usize,
    seed: u64,
) -> Result<Check, CliError> {
    if replicas == 0 {
        return Err(CliError::Input("replicas: need at least 1".into()));
    }
    let limit = BipartiteModel::new(lambda_s, 1.0 - lambda_s)
        .map_err(|e| CliError::Input(format!("lambda-s: {e}")))?
        .e_star();
    let values = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let s = if replicas == 1 {
                seed
            } else {
                replica_seed(seed, i as u64)
            };
            wishart_ground_state(n, lambda_s, s)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mean = values.iter().sum::<f64>() / replicas as f64;
    let mut c = Check::within("wishart", mean, limit, 0.98 * limit, 1.005 * limit);
    c.detail = values
        .iter()
        .map(|v| format!("replica estimate {v:.8}"))
        .collect();
    Ok(c)
}

pub fn verify_groundstate(
    model: &ModelSpec,
    n: usize,
    restarts: usize,
    seed: u64,
) -> Result<Check, CliError> {
    let e_star = Solver::for_model(model)?.e_star();
    let sizes = species_sizes(model, n)?;
    let estimate = gradient_ascent_ground_state(model, &sizes, restarts, seed)?;
    let mut c = Check::within("groundstate", estimate, e_star, e_star - 0.2, e_star + 0.05);
    c.detail = vec![format!(
        "N = {sizes:?}, {restarts} restarts, heuristic lower bound"
    )];
    Ok(c)
}

pub fn verify_small_beta(
    model: &ModelSpec,
    n: usize,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<Check, CliError> {
    const TOL: f64 = 0.02;
    let sizes = species_sizes(model, n)?;
    let est = small_beta_free_energy(model, &sizes, beta, samples, seed)?;
    let mut c = Check::within(
        "smallbeta",
        est.estimate,
        est.annealed,
        est.annealed - TOL,
        est.annealed + TOL,
    );
    c.detail = vec![format!(
        "standard error {:.3e} over {samples} samples",
        est.std_error
    )];
    Ok(c)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize output: {e}")))?;
    println!("{text}");
    Ok(())
}
