//! Free energy and maximal overlap above the critical temperature.
//!
//! For `β > β_c` the maximal multi-samplable overlap is
//! `q(s) = y★/(Γ(s) + y★)` where
//!
//! - `Γ(s) = (−√Φ(q_c) + √(Φ(q_c) + 4λ(s)/p(s)))/2` does not depend on `β`,
//! - `y★` is the larger positive root of `Υ(y) = y²·Π_s (Γ(s)/y + 1)^p(s) = β²`.
//!
//! `Υ` decreases on `(0, y₀]` and increases on `[y₀, ∞)`, so the larger root is
//! bracketed by `[y₀, Y]` for any `Y` with `Υ(Y) > β²`.

use serde::Serialize;

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OverlapVector};
use crate::roots::bisect;

const NEAR_CRITICAL_REL: f64 = 1e-10;
const UPSILON_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupercriticalSolution {
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub y_star: f64,
    pub q: OverlapVector,
    pub free_energy: f64,
    pub xi_q_one: f64,
    pub a_star: f64,
}

/// `Γ(s)` from `Φ(q_c)`.
pub fn gamma_vector(model: &ModelSpec, phi_qc: f64) -> Result<Vec<f64>> {
    if !(phi_qc >= 0.0) {
        return Err(Error::Domain(format!("phi_qc must be >= 0, got {phi_qc}")));
    }
    let root_phi = phi_qc.sqrt();
    Ok((0..model.num_species())
        .map(|s| {
            let r = model.lambda()[s] / model.degrees()[s] as f64;
            // (−a + √(a² + 4r))/2 rewritten without cancellation
            2.0 * r / (root_phi + (phi_qc + 4.0 * r).sqrt())
        })
        .collect())
}

/// `Θ` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn theta(model: &ModelSpec, y: f64) -> Theta {
    let mut out = Theta {
        value: y,
        first: 1.0,
        second: 0.0,
    };
    for s in 0..model.num_species() {
        let l = model.lambda()[s];
        let p = model.degrees()[s] as f64;
        let r2 = y * y + 4.0 * l / p;
        let r = r2.sqrt();
        // −y + r = (4l/p)/(y + r), stable for large positive y
        let gap = if y >= 0.0 {
            4.0 * l / p / (y + r)
        } else {
            r - y
        };
        out.value += 0.5 * p * gap;
        out.first += 0.5 * p * (y / r - 1.0);
        out.second += 2.0 * l / (r2 * r);
    }
    out
}

/// `Υ(y)` and `Υ'(y) = (Υ(y)/y)·(2 − Σ_s p(s)Γ(s)/(Γ(s) + y))`.
pub fn upsilon(model: &ModelSpec, gamma: &[f64], y: f64) -> Result<(f64, f64)> {
    check_gamma(model, gamma)?;
    if !(y > 0.0) {
        return Err(Error::Domain(format!("Upsilon needs y > 0, got {y}")));
    }
    let value = upsilon_value(model, gamma, y);
    let slope = value / y * (2.0 - weighted_share(model, gamma, y));
    Ok((value, slope))
}

fn check_gamma(model: &ModelSpec, gamma: &[f64]) -> Result<()> {
    if gamma.len() != model.num_species() {
        return Err(Error::DimensionMismatch {
            expected: model.num_species(),
            got: gamma.len(),
        });
    }
    Ok(())
}

fn upsilon_value(model: &ModelSpec, gamma: &[f64], y: f64) -> f64 {
    let mut v = y * y;
    for (s, &g) in gamma.iter().enumerate() {
        v *= (g / y + 1.0).powi(model.degrees()[s] as i32);
    }
    v
}

fn weighted_share(model: &ModelSpec, gamma: &[f64], y: f64) -> f64 {
    gamma
        .iter()
        .zip(model.degrees())
        .map(|(&g, &p)| p as f64 * g / (g + y))
        .sum()
}

/// Turning point of `Υ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPoint {
    pub y0: f64,
    /// `|p| = 2`: `Υ` is increasing on all of `(0, ∞)` and `y0 = 0`.
    pub degenerate: bool,
}

/// The unique `y₀ > 0` with `Σ_s p(s)Γ(s)/(Γ(s) + y₀) = 2`.
pub fn find_y0(model: &ModelSpec, gamma: &[f64]) -> Result<TurningPoint> {
    check_gamma(model, gamma)?;
    if model.total_degree() <= 2 {
        return Ok(TurningPoint {
            y0: 0.0,
            degenerate: true,
        });
    }
    let h = |y: f64| weighted_share(model, gamma, y) - 2.0;
    let mut hi = gamma.iter().fold(0.0f64, |m, &g| m.max(g)).max(1.0);
    while h(hi) >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("no turning point for Upsilon".into()));
        }
    }
    let y0 = bisect(h, 0.0, hi)?;
    Ok(TurningPoint {
        y0,
        degenerate: false,
    })
}

/// Larger positive root of `Υ(y) = β²`.
pub fn solve_y_star(model: &ModelSpec, gamma: &[f64], beta: f64, beta_c: f64) -> Result<f64> {
    if !(beta > beta_c) {
        return Err(Error::Domain(format!(
            "y_star needs beta > beta_c, got beta = {beta}, beta_c = {beta_c}"
        )));
    }
    let target = beta * beta;
    let turning = find_y0(model, gamma)?;
    let floor = if turning.degenerate {
        gamma
            .iter()
            .zip(model.degrees())
            .map(|(&g, &p)| g.powi(p as i32))
            .product()
    } else {
        upsilon_value(model, gamma, turning.y0)
    };
    if floor > target {
        return Err(Error::Numerical(format!(
            "Upsilon(y0) = {floor} exceeds beta^2 = {target}: no root, which contradicts beta > beta_c"
        )));
    }
    let lo = turning.y0;
    let mut hi = lo.max(1.0);
    while upsilon_value(model, gamma, hi) <= target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical(
                "Upsilon bracket expansion overflowed".into(),
            ));
        }
    }
    let f = |y: f64| {
        if y <= 0.0 {
            floor - target
        } else {
            upsilon_value(model, gamma, y) - target
        }
    };
    let y = bisect(f, lo, hi)?;
    let miss = (upsilon_value(model, gamma, y) - target).abs();
    if miss > UPSILON_REL_TOL * target {
        return Err(Error::Numerical(format!(
            "Upsilon root inaccurate: |Upsilon(y) - beta^2| = {miss:e} at y = {y}"
        )));
    }
    Ok(y)
}

/// Overlap, free energy and auxiliaries at `β > β_c`.
pub fn solve_supercritical(
    model: &ModelSpec,
    critical: &CriticalPoint,
    beta: f64,
) -> Result<SupercriticalSolution> {
    if !(beta > critical.beta_c) {
        return Err(Error::Domain(format!(
            "beta = {beta} is not above beta_c = {}; use free_energy_at",
            critical.beta_c
        )));
    }
    let gamma = gamma_vector(model, critical.phi_qc)?;
    let a_star = critical.a_star();

    if beta - critical.beta_c < NEAR_CRITICAL_REL * critical.beta_c {
        let q = critical.q_c.clone();
        let xi_c = model.xi(&q)?;
        return Ok(SupercriticalSolution {
            beta,
            y_star: critical.beta_c * xi_c.sqrt(),
            xi_q_one: model.xi_q_at_one(&q)?,
            free_energy: 0.5 * beta * beta,
            q,
            gamma,
            a_star,
        });
    }

    let y = solve_y_star(model, &gamma, beta, critical.beta_c)?;
    let q: Vec<f64> = gamma.iter().map(|&g| y / (g + y)).collect();
    let log_one_minus: f64 = gamma
        .iter()
        .zip(model.lambda())
        .map(|(&g, &l)| l * (g / (g + y)).ln())
        .sum();
    let xi_q_one = model.xi_q_at_one(&q)?;
    let xi = model.xi_unchecked(&q);
    let free_energy =
        beta * xi.sqrt() * critical.e_star + 0.5 * log_one_minus + 0.5 * beta * beta * xi_q_one;

    Ok(SupercriticalSolution {
        beta,
        gamma,
        y_star: y,
        q: OverlapVector(q),
        free_energy,
        xi_q_one,
        a_star,
    })
}

/// `F(β)`: the annealed value `½β²ξ(1)` up to `β_c`, the supercritical
/// formula beyond.
pub fn free_energy_at(model: &ModelSpec, critical: &CriticalPoint, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be >= 0, got {beta}")));
    }
    if beta <= critical.beta_c {
        // ξ(1) = 1 for a pure model
        return Ok(0.5 * beta * beta);
    }
    Ok(solve_supercritical(model, critical, beta)?.free_energy)
}
