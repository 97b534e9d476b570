//! Finite-N Monte Carlo checks.
//!
//! The Hamiltonian is `H(σ) = C_{N,p} Σ_{I(p)} J_{i₁…i_|p|} σ_{i₁}⋯σ_{i_|p|}` with
//! `C² = (N/Π_s N_s^{p(s)})·(Π_s p(s)!)/|p|!`. The index set `I(p)` contains
//! every ordered tuple with `p(s)` entries in block `s`, in any position. A
//! tuple is determined by a species-sorted tuple plus one of the
//! `M = |p|!/Π_s p(s)!` position arrangements, and all arrangements multiply
//! the same monomial. Their `M` independent couplings are therefore merged
//! into one Gaussian of variance `M`, and the coefficient tensor is stored on
//! species-sorted axes only. The law of `H` is unchanged.
//!
//! Every random stream is keyed by `(master seed, replica index)` through
//! [`replica_seed`], and parallel work is aggregated in index order, so
//! results do not depend on the number of worker threads.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bipartite::BipartiteModel;
use crate::critical::solve_critical;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OverlapVector};

/// Upper bound on stored coefficients.
pub const MAX_TENSOR_ENTRIES: usize = 100_000_000;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const PAIR_STREAM: u64 = 0x5041_4952_5354_524D;
const START_STREAM: u64 = 0x5354_4152_5453_5452;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under `master`: SplitMix64 of
/// `master + (index + 1)·0x9E3779B97F4A7C15`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// ChaCha8 stream for replica `index`.
pub fn replica_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replica_seed(master, index))
}

/// Split `n_total` into per-species block sizes `round(λ(s)·n)`, with the last
/// block taking the remainder.
pub fn species_sizes(model: &ModelSpec, n_total: usize) -> Result<Vec<usize>> {
    let k = model.num_species();
    let mut sizes: Vec<usize> = model.lambda()[..k - 1]
        .iter()
        .map(|l| (l * n_total as f64).round() as usize)
        .collect();
    let used: usize = sizes.iter().sum();
    if used >= n_total {
        return Err(Error::Domain(format!(
            "n = {n_total} is too small to split across {k} species"
        )));
    }
    sizes.push(n_total - used);
    Ok(sizes)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// A configuration on the product of spheres `Π_s S(N_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub blocks: Vec<Vec<f64>>,
}

impl Configuration {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    /// Uniform draw: normalized Gaussian vector per block.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut c = Self {
            blocks: sizes
                .iter()
                .map(|&n| (0..n).map(|_| rng.sample(StandardNormal)).collect())
                .collect(),
        };
        c.retract();
        c
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Rescale every block to norm `√N_s`.
    pub fn retract(&mut self) {
        for b in &mut self.blocks {
            let norm = dot(b, b).sqrt();
            if norm > 0.0 {
                let scale = (b.len() as f64).sqrt() / norm;
                b.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|v| -v).collect())
                .collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `R_s(σ, σ') = N_s⁻¹ Σ_{i∈I_s} σ_i σ'_i`.
pub fn overlap(a: &Configuration, b: &Configuration) -> Result<OverlapVector> {
    if a.sizes() != b.sizes() {
        return Err(Error::DimensionMismatch {
            expected: a.blocks.len(),
            got: b.blocks.len(),
        });
    }
    Ok(OverlapVector(
        a.blocks
            .iter()
            .zip(&b.blocks)
            .map(|(x, y)| dot(x, y) / x.len() as f64)
            .collect(),
    ))
}

/// One draw of the pure p-spin Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSample {
    pub n_per_species: Vec<usize>,
    /// Species owning each tensor axis, sorted by species.
    pub axis_species: Vec<usize>,
    /// Row-major, last axis fastest.
    pub coefficients: Vec<f64>,
    /// `C²_{N,p}`.
    pub normalization: f64,
    /// `|p|!/Π_s p(s)!` position arrangements merged into each coefficient.
    pub arrangements: f64,
    pub seed: u64,
}

pub fn sample_hamiltonian(
    model: &ModelSpec,
    n_per_species: &[usize],
    seed: u64,
) -> Result<HamiltonianSample> {
    let mut h = HamiltonianSample::layout(model, n_per_species, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = h.len();
    h.coefficients = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    Ok(h)
}

impl HamiltonianSample {
    fn layout(model: &ModelSpec, n_per_species: &[usize], seed: u64) -> Result<Self> {
        if n_per_species.len() != model.num_species() {
            return Err(Error::DimensionMismatch {
                expected: model.num_species(),
                got: n_per_species.len(),
            });
        }
        if let Some(&n) = n_per_species.iter().find(|&&n| n < 2) {
            return Err(Error::Domain(format!(
                "every species needs at least 2 sites, got {n}"
            )));
        }
        let axis_species: Vec<usize> = model
            .degrees()
            .iter()
            .enumerate()
            .flat_map(|(s, &d)| std::iter::repeat_n(s, d as usize))
            .collect();
        let entries = axis_species
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(n_per_species[s]));
        match entries {
            Some(e) if e <= MAX_TENSOR_ENTRIES => {}
            _ => {
                return Err(Error::SizeLimit(format!(
                    "coefficient tensor for sizes {n_per_species:?} exceeds {MAX_TENSOR_ENTRIES} entries"
                )))
            }
        }
        let n_total: usize = n_per_species.iter().sum();
        let denom: f64 = model
            .degrees()
            .iter()
            .zip(n_per_species)
            .map(|(&d, &n)| (n as f64).powi(d as i32))
            .product();
        let fact_prod: f64 = model.degrees().iter().map(|&d| factorial(d)).product();
        let total = factorial(model.total_degree());
        Ok(Self {
            n_per_species: n_per_species.to_vec(),
            axis_species,
            coefficients: Vec::new(),
            normalization: n_total as f64 / denom * fact_prod / total,
            arrangements: total / fact_prod,
            seed,
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axis_species
            .iter()
            .map(|&s| self.n_per_species[s])
            .collect()
    }

    fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn n_total(&self) -> usize {
        self.n_per_species.iter().sum()
    }

    /// Overall factor `C·√M` applied to the stored contraction.
    pub fn scale(&self) -> f64 {
        (self.normalization * self.arrangements).sqrt()
    }

    fn check(&self, sigma: &Configuration) -> Result<()> {
        if sigma.sizes() != self.n_per_species {
            return Err(Error::DimensionMismatch {
                expected: self.n_total(),
                got: sigma.sizes().iter().sum(),
            });
        }
        Ok(())
    }

    fn axis_vectors<'a>(&self, sigma: &'a Configuration) -> Vec<&'a [f64]> {
        self.axis_species
            .iter()
            .map(|&s| sigma.blocks[s].as_slice())
            .collect()
    }

    pub fn eval(&self, sigma: &Configuration) -> Result<f64> {
        self.check(sigma)?;
        let vecs = self.axis_vectors(sigma);
        let shape = self.shape();
        let buf = reduce_trailing(&self.coefficients, &shape, &vecs, 0);
        Ok(self.scale() * dot(&buf, vecs[0]))
    }

    /// Euclidean gradient `∂H/∂σ`, block by block.
    pub fn gradient(&self, sigma: &Configuration) -> Result<Vec<Vec<f64>>> {
        self.check(sigma)?;
        let vecs = self.axis_vectors(sigma);
        let shape = self.shape();
        let scale = self.scale();
        let depth = shape.len();
        // suffix[k]: axes k+1.. contracted; only the first reduction touches
        // the full coefficient array
        let mut suffix: Vec<Cow<[f64]>> = Vec::with_capacity(depth);
        suffix.push(Cow::Borrowed(&self.coefficients));
        for axis in (1..depth).rev() {
            let n = shape[axis];
            let last = suffix.last().expect("non-empty");
            let next: Vec<f64> = last.chunks_exact(n).map(|c| dot(c, vecs[axis])).collect();
            suffix.push(Cow::Owned(next));
        }
        suffix.reverse();

        let mut grad: Vec<Vec<f64>> = self.n_per_species.iter().map(|&n| vec![0.0; n]).collect();
        for (axis, &s) in self.axis_species.iter().enumerate() {
            let partial = contract_leading(&suffix[axis], &shape, &vecs, axis);
            for (g, p) in grad[s].iter_mut().zip(partial) {
                *g += scale * p;
            }
        }
        Ok(grad)
    }
}

/// Contract axes `keep+1..` against `vecs`, leaving a buffer over axes `..=keep`.
fn reduce_trailing<'a>(
    coeffs: &'a [f64],
    shape: &[usize],
    vecs: &[&[f64]],
    keep: usize,
) -> Cow<'a, [f64]> {
    let mut buf = Cow::Borrowed(coeffs);
    for axis in (keep + 1..shape.len()).rev() {
        let n = shape[axis];
        let next: Vec<f64> = buf.chunks_exact(n).map(|c| dot(c, vecs[axis])).collect();
        buf = Cow::Owned(next);
    }
    buf
}

/// Contract axes `..skip` of a buffer over axes `..=skip`.
fn contract_leading(buf: &[f64], shape: &[usize], vecs: &[&[f64]], skip: usize) -> Vec<f64> {
    let mut buf = Cow::Borrowed(buf);
    for axis in 0..skip {
        let n = shape[axis];
        let rest = buf.len() / n;
        let mut next = vec![0.0; rest];
        for (&w, row) in vecs[axis].iter().zip(buf.chunks_exact(rest)) {
            next.iter_mut().zip(row).for_each(|(acc, &r)| *acc += w * r);
        }
        buf = Cow::Owned(next);
    }
    buf.into_owned()
}

pub fn eval_hamiltonian(h: &HamiltonianSample, sigma: &Configuration) -> Result<f64> {
    h.eval(sigma)
}

/// Per-pair outcome of [`covariance_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStatistic {
    pub overlap: Vec<f64>,
    pub target: f64,
    pub mean: f64,
    pub std_error: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub trials: usize,
    pub pairs: Vec<PairStatistic>,
    pub max_abs_z: f64,
}

/// Configuration pairs with prescribed overlaps: `(σ, σ)`, a pair with the
/// first block orthogonal, then random per-block overlaps in `(−1, 1)`.
fn configuration_pairs(
    sizes: &[usize],
    pairs: usize,
    seed: u64,
) -> Vec<(Configuration, Configuration)> {
    let stream = replica_seed(seed, PAIR_STREAM);
    (0..pairs)
        .map(|i| {
            let mut rng = replica_rng(stream, i as u64);
            let a = Configuration::random(sizes, &mut rng);
            let rhos: Vec<f64> = match i {
                0 => vec![1.0; sizes.len()],
                1 => (0..sizes.len())
                    .map(|s| {
                        if s == 0 {
                            0.0
                        } else {
                            rng.random_range(-0.9..0.9)
                        }
                    })
                    .collect(),
                _ => (0..sizes.len())
                    .map(|_| rng.random_range(-0.9..0.9))
                    .collect(),
            };
            let blocks = a
                .blocks
                .iter()
                .zip(&rhos)
                .map(|(x, &rho)| correlated_block(x, rho, &mut rng))
                .collect();
            (a, Configuration::new(blocks))
        })
        .collect()
}

/// A block with overlap exactly `rho` against `x` (norm `√n`).
fn correlated_block<R: Rng + ?Sized>(x: &[f64], rho: f64, rng: &mut R) -> Vec<f64> {
    let n = x.len() as f64;
    let mut u: Vec<f64> = x.iter().map(|_| rng.sample(StandardNormal)).collect();
    let proj = dot(&u, x) / n;
    u.iter_mut().zip(x).for_each(|(ui, xi)| *ui -= proj * xi);
    let norm = dot(&u, &u).sqrt();
    let perp = (1.0 - rho * rho).max(0.0).sqrt() * n.sqrt() / norm;
    x.iter()
        .zip(&u)
        .map(|(xi, ui)| rho * xi + perp * ui)
        .collect()
}

/// Compare `E[H(σ)H(σ')]` across `trials` Hamiltonian draws with `N·ξ(R)`.
pub fn covariance_check(
    model: &ModelSpec,
    n_per_species: &[usize],
    trials: usize,
    pairs: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    if trials < 100 {
        return Err(Error::Domain(format!(
            "covariance check needs at least 100 trials, got {trials}"
        )));
    }
    let configs = configuration_pairs(n_per_species, pairs, seed);
    // validate sizes once before fanning out
    HamiltonianSample::layout(model, n_per_species, seed)?;
    let products: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let h = sample_hamiltonian(model, n_per_species, replica_seed(seed, t as u64))?;
            configs
                .iter()
                .map(|(a, b)| Ok(h.eval(a)? * h.eval(b)?))
                .collect()
        })
        .collect::<Result<_>>()?;

    let n_total: usize = n_per_species.iter().sum();
    let count = trials as f64;
    let mut stats = Vec::with_capacity(pairs);
    for (k, (a, b)) in configs.iter().enumerate() {
        let mean = products.iter().map(|row| row[k]).sum::<f64>() / count;
        let var = products
            .iter()
            .map(|row| (row[k] - mean).powi(2))
            .sum::<f64>()
            / (count - 1.0);
        let std_error = (var / count).sqrt();
        let r = overlap(a, b)?;
        let target = n_total as f64 * model.xi(&r)?;
        stats.push(PairStatistic {
            overlap: r.0,
            target,
            mean,
            std_error,
            z_score: (mean - target) / std_error,
        });
    }
    let max_abs_z = stats.iter().fold(0.0f64, |m, s| m.max(s.z_score.abs()));
    Ok(CovarianceReport {
        trials,
        pairs: stats,
        max_abs_z,
    })
}

/// `√(ν_max(MᵀM)/n)` for a `⌊λ_s n⌋ × (n − ⌊λ_s n⌋)` standard Gaussian `M`.
///
/// This is `(1/N)·max H` for one draw of the bipartite model.
pub fn wishart_ground_state(n_total: usize, lambda_s: f64, seed: u64) -> Result<f64> {
    if n_total < 50 {
        return Err(Error::Domain(format!(
            "n must be at least 50, got {n_total}"
        )));
    }
    if !(lambda_s > 0.0 && lambda_s < 1.0) {
        return Err(Error::Domain(format!(
            "lambda_s must lie in (0,1), got {lambda_s}"
        )));
    }
    let rows = (lambda_s * n_total as f64).floor() as usize;
    let cols = n_total - rows;
    if rows == 0 || cols == 0 {
        return Err(Error::Domain("empty Wishart block".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let nu = top_eigenvalue_gram(&m, rows, cols, &mut rng)?;
    Ok((nu / n_total as f64).sqrt())
}

/// Largest eigenvalue of `MᵀM` by power iteration, relative tolerance 1e-10.
fn top_eigenvalue_gram<R: Rng + ?Sized>(
    m: &[f64],
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut v: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut w = vec![0.0; rows];
    let mut u = vec![0.0; cols];
    let mut prev = 0.0;
    for _ in 0..100_000 {
        for (wi, row) in w.iter_mut().zip(m.chunks_exact(cols)) {
            *wi = dot(row, &v);
        }
        u.iter_mut().for_each(|x| *x = 0.0);
        for (&wi, row) in w.iter().zip(m.chunks_exact(cols)) {
            u.iter_mut().zip(row).for_each(|(ui, &r)| *ui += wi * r);
        }
        let nu = dot(&v, &u);
        let norm = dot(&u, &u).sqrt();
        v.iter_mut().zip(&u).for_each(|(vi, &ui)| *vi = ui / norm);
        if (nu - prev).abs() <= 1e-10 * nu {
            return Ok(nu);
        }
        prev = nu;
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}

/// Outcome of one projected gradient ascent run.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentRun {
    pub energy_per_site: f64,
    pub iterations: usize,
    pub config: Configuration,
}

const ASCENT_STEP: f64 = 0.1;
const ASCENT_REL_GAIN: f64 = 1e-10;
const ASCENT_MAX_ITER: usize = 10_000;
const MAX_HALVINGS: usize = 40;

/// Riemannian gradient ascent on `Π_s S(N_s)` from `start`.
pub fn ascend(h: &HamiltonianSample, start: Configuration) -> Result<AscentRun> {
    let n = h.n_total() as f64;
    let mut sigma = start;
    sigma.retract();
    let mut energy = h.eval(&sigma)?;
    let mut iterations = 0;
    while iterations < ASCENT_MAX_ITER {
        iterations += 1;
        let mut grad = h.gradient(&sigma)?;
        // remove the radial component per block
        for (g, x) in grad.iter_mut().zip(&sigma.blocks) {
            let radial = dot(g, x) / x.len() as f64;
            g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= radial * xi);
        }
        let mut step = ASCENT_STEP;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = Configuration::new(
                sigma
                    .blocks
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| x.iter().zip(g).map(|(xi, gi)| xi + step * gi).collect())
                    .collect(),
            );
            trial.retract();
            let e = h.eval(&trial)?;
            if e > energy {
                accepted = Some((trial, e));
                break;
            }
            step *= 0.5;
        }
        let Some((next, e)) = accepted else { break };
        let gain = (e - energy) / energy.abs().max(f64::MIN_POSITIVE);
        sigma = next;
        energy = e;
        if gain < ASCENT_REL_GAIN {
            break;
        }
    }
    log::debug!(
        "ascent stopped after {iterations} iterations at H/N = {}",
        energy / n
    );
    Ok(AscentRun {
        energy_per_site: energy / n,
        iterations,
        config: sigma,
    })
}

/// Best `H/N` over `restarts` ascents on one Hamiltonian draw.
///
/// The draw uses `seed`; restart `i` starts from a uniform point keyed by
/// `(seed, i)`, so a larger restart count only adds starts.
pub fn gradient_ascent_ground_state(
    model: &ModelSpec,
    n_per_species: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    Ok(gradient_ascent_runs(model, n_per_species, restarts, seed)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Per-restart `H/N` values, in restart order.
pub fn gradient_ascent_runs(
    model: &ModelSpec,
    n_per_species: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if restarts == 0 {
        return Err(Error::Domain("restarts must be at least 1".into()));
    }
    let h = sample_hamiltonian(model, n_per_species, seed)?;
    let stream = replica_seed(seed, START_STREAM);
    (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(stream, i as u64);
            let start = Configuration::random(n_per_species, &mut rng);
            Ok(ascend(&h, start)?.energy_per_site)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallBetaEstimate {
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub std_error: f64,
    pub annealed: f64,
}

/// `(1/N)·log mean_i exp(βH(σ_i))` over uniform `σ_i`, one Hamiltonian draw.
///
/// Only meaningful deep in the high-temperature phase; `β ≤ β_c/2` is enforced.
pub fn small_beta_free_energy(
    model: &ModelSpec,
    n_per_species: &[usize],
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<SmallBetaEstimate> {
    if samples == 0 {
        return Err(Error::Domain("samples must be positive".into()));
    }
    let beta_c = if model.is_bipartite() {
        BipartiteModel::from_spec(model)?.beta_c()
    } else {
        solve_critical(model)?.beta_c
    };
    if !(beta >= 0.0 && beta <= 0.5 * beta_c) {
        return Err(Error::Domain(format!(
            "small-beta estimator needs 0 <= beta <= beta_c/2 = {}, got {beta}",
            0.5 * beta_c
        )));
    }
    let h = sample_hamiltonian(model, n_per_species, seed)?;
    let stream = replica_seed(seed, START_STREAM);
    let exponents: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(stream, i as u64);
            let sigma = Configuration::random(n_per_species, &mut rng);
            Ok(beta * h.eval(&sigma)?)
        })
        .collect::<Result<_>>()?;

    let n = h.n_total() as f64;
    let top = exponents.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let weights: Vec<f64> = exponents.iter().map(|&x| (x - top).exp()).collect();
    let count = samples as f64;
    let mean = weights.iter().sum::<f64>() / count;
    let var = if samples > 1 {
        weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(SmallBetaEstimate {
        estimate: (top + mean.ln()) / n,
        std_error: (var / count).sqrt() / mean / n,
        annealed: 0.5 * beta * beta,
    })
}
