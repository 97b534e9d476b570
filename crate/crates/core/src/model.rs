//! Mixture-polynomial algebra for pure multi-species models.
//!
//! All quantities here are functions of the model `(λ, p)` and a point
//! `x ∈ [0,1]^S`. Quotients of the form `ξ(q)/q(s)` are always evaluated as
//! the cancelled product (exponent `p(s) − 1`) so boundary points stay finite.

use std::collections::BTreeMap;
use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAMBDA_SUM_TOL: f64 = 1e-12;
const HESSIAN_ZERO_REL: f64 = 1e-10;

/// A pure multi-species model `ξ(x) = Π_s x(s)^p(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    species: Vec<String>,
    lambda: Vec<f64>,
    p: Vec<u32>,
}

impl ModelSpec {
    pub fn new(species: Vec<String>, lambda: Vec<f64>, p: Vec<u32>) -> Result<Self> {
        if species.len() != lambda.len() || species.len() != p.len() {
            return Err(Error::InvalidModel(format!(
                "species ({}), lambda ({}) and p ({}) must have equal length",
                species.len(),
                lambda.len(),
                p.len()
            )));
        }
        if species.len() < 2 {
            return Err(Error::InvalidModel(
                "at least 2 species are required".into(),
            ));
        }
        for (label, &l) in species.iter().zip(&lambda) {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::InvalidModel(format!(
                    "lambda of species '{label}' must lie in (0,1), got {l}"
                )));
            }
        }
        if let Some(pos) = p.iter().position(|&d| d < 1) {
            return Err(Error::InvalidModel(format!(
                "p of species '{}' must be at least 1",
                species[pos]
            )));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > LAMBDA_SUM_TOL {
            return Err(Error::InvalidModel(format!("lambda sums to {sum}")));
        }
        Ok(Self { species, lambda, p })
    }

    /// Convenience constructor with labels `s0, s1, ...`.
    pub fn from_parts(lambda: &[f64], p: &[u32]) -> Result<Self> {
        let species = (0..lambda.len()).map(|i| format!("s{i}")).collect();
        Self::new(species, lambda.to_vec(), p.to_vec())
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn degrees(&self) -> &[u32] {
        &self.p
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    /// `|p| = Σ_s p(s)`.
    pub fn total_degree(&self) -> u32 {
        self.p.iter().sum()
    }

    /// `|p| = 2`, i.e. two species of degree one.
    pub fn is_bipartite(&self) -> bool {
        self.total_degree() == 2
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_species() {
            return Err(Error::DimensionMismatch {
                expected: self.num_species(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `ξ(x) = Π_s x(s)^p(s)`.
    pub fn xi(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.xi_unchecked(x))
    }

    pub(crate) fn xi_unchecked(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.p)
            .map(|(&v, &d)| v.powi(d as i32))
            .product()
    }

    /// Gradient of `ξ`, with `(p(s)/q(s))·ξ(q)` evaluated by cancellation.
    pub fn grad_xi(&self, q: &[f64]) -> Result<OverlapVector> {
        self.check_dim(q)?;
        let grad = (0..self.num_species())
            .map(|s| {
                let own = self.p[s] as f64 * q[s].powi(self.p[s] as i32 - 1);
                let rest: f64 = (0..self.num_species())
                    .filter(|&t| t != s)
                    .map(|t| q[t].powi(self.p[t] as i32))
                    .product();
                own * rest
            })
            .collect();
        Ok(OverlapVector(grad))
    }

    /// Hessian `∇²ξ(x) = ξ(x)[v vᵀ − diag(p/x²)]` with `v = p/x`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        if let Some(s) = x.iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::Domain(format!(
                "Hessian needs x in (0,1], got x({}) = {}",
                self.species[s], x[s]
            )));
        }
        let n = self.num_species();
        let xi = self.xi_unchecked(x);
        let ratio: Vec<f64> = (0..n).map(|s| self.p[s] as f64 / x[s]).collect();
        Ok(DMatrix::from_fn(n, n, |s, t| {
            let diag = if s == t {
                self.p[s] as f64 / (x[s] * x[s])
            } else {
                0.0
            };
            xi * (ratio[s] * ratio[t] - diag)
        }))
    }

    /// Eigenvalue sign counts of the Hessian at an interior point.
    pub fn hessian_signature(&self, x: &[f64]) -> Result<Signature> {
        let h = self.hessian(x)?;
        let eig = SymmetricEigen::new(h).eigenvalues;
        let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let thresh = HESSIAN_ZERO_REL * scale;
        let mut sig = Signature::default();
        for &v in eig.iter() {
            if v > thresh {
                sig.positive += 1;
            } else if v < -thresh {
                sig.negative += 1;
            } else {
                sig.zero += 1;
            }
        }
        Ok(sig)
    }

    /// `V`, `U`, `Φ = V/U` and `Ω = V·U` at `q ∈ (0,1)^S`.
    pub fn potentials(&self, q: &[f64]) -> Result<Potentials> {
        self.check_dim(q)?;
        if let Some(s) = q.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
            let why = if q[s] == 0.0 {
                "U undefined"
            } else {
                "q outside (0,1)"
            };
            return Err(Error::Domain(format!(
                "{why}: q({}) = {}",
                self.species[s], q[s]
            )));
        }
        let v: f64 = -q
            .iter()
            .zip(&self.lambda)
            .map(|(&qs, &l)| l * (-qs).ln_1p())
            .sum::<f64>();
        let u = 1.0
            + q.iter()
                .zip(&self.p)
                .map(|(&qs, &d)| (1.0 - qs) * d as f64 / qs)
                .sum::<f64>();
        Ok(Potentials {
            v,
            u,
            phi: v / u,
            omega: v * u,
        })
    }

    /// `Φ(q)`, extended by its limit `Φ(0) = 0` at the origin.
    ///
    /// Only the bipartite path needs the origin; every other boundary point
    /// is rejected as in [`ModelSpec::potentials`].
    pub fn phi_with_origin_limit(&self, q: &[f64]) -> Result<f64> {
        self.check_dim(q)?;
        if q.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        Ok(self.potentials(q)?.phi)
    }

    /// Non-zero coefficients `Δ²_{q,k}` of the recentred mixture `ξ_q`.
    pub fn xi_q_coefficients(&self, q: &[f64]) -> Result<MixtureQCoefficients> {
        self.check_dim(q)?;
        check_overlap(&self.species, q)?;
        let mut terms = BTreeMap::new();
        for k in multi_indices(&self.p) {
            if k.iter().sum::<u32>() < 2 {
                continue;
            }
            let coef = k
                .iter()
                .zip(&self.p)
                .zip(q)
                .map(|((&ks, &ps), &qs)| {
                    binomial(ps, ks) * (1.0 - qs).powi(ks as i32) * qs.powi((ps - ks) as i32)
                })
                .product::<f64>();
            if coef > 0.0 {
                terms.insert(k, coef);
            }
        }
        Ok(MixtureQCoefficients { terms })
    }

    /// `ξ_q(1) = ξ(1) − ξ(q) − Σ_s (1−q(s))·∇ξ(q)(s)`.
    ///
    /// Evaluated as the sum of the non-negative coefficients `Δ²_{q,k}`, which
    /// avoids the cancellation of the literal form as `q → 1`.
    pub fn xi_q_at_one(&self, q: &[f64]) -> Result<f64> {
        Ok(self.xi_q_coefficients(q)?.sum())
    }
}

fn check_overlap(species: &[String], q: &[f64]) -> Result<()> {
    if let Some(s) = q.iter().position(|&v| !(0.0..1.0).contains(&v)) {
        return Err(Error::Domain(format!(
            "overlap q({}) = {} outside [0,1)",
            species[s], q[s]
        )));
    }
    Ok(())
}

/// All `k` with `0 ≤ k(s) ≤ p(s)`, in lexicographic order.
fn multi_indices(p: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(p.len())];
    for &ps in p {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=ps).map(move |k| {
                    let mut next = prefix.clone();
                    next.push(k);
                    next
                })
            })
            .collect();
    }
    out
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Per-species vector: an overlap `q ∈ [0,1)^S` or a generic point in `[0,1]^S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverlapVector(pub Vec<f64>);

impl OverlapVector {
    pub fn constant(value: f64, len: usize) -> Self {
        Self(vec![value; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for OverlapVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for OverlapVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials {
    pub v: f64,
    pub u: f64,
    pub phi: f64,
    pub omega: f64,
}

/// `ξ_q(x) = Σ_k Δ²_{q,k} Π_s x(s)^k(s)` over `k ≤ p`, `|k| ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureQCoefficients {
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl MixtureQCoefficients {
    pub fn sum(&self) -> f64 {
        self.terms.values().sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                c * k
                    .iter()
                    .zip(x)
                    .map(|(&ks, &xs)| xs.powi(ks as i32))
                    .product::<f64>()
            })
            .sum()
    }
}
