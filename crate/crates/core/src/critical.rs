//! Critical overlap, critical inverse temperature and ground-state energy.
//!
//! The critical overlap solves `(λ(s)/p(s))·q(s)²/(1−q(s)) = Φ(q)` for every
//! species. Writing `q_z(s) = f_s⁻¹(z)` with `f_s(x) = (λ(s)/p(s))·x²/(1−x)`
//! collapses the system to the scalar equation
//!
//! ```text
//! g(z) = z + Σ_t λ(t)·q_z(t) + Σ_t λ(t)·log(1 − q_z(t)) = 0,
//! ```
//!
//! where `g(0) = 0`, `g'(0⁺) = 1 − |p|/2` and `g` is strictly convex. For
//! `|p| ≥ 3` there is exactly one positive root, found here by bracketing.
//! `β_c = √(Φ(q_c)/ξ(q_c))` and `E★ = √Ω(q_c)` follow.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, OverlapVector};
use crate::roots::{brent, Tolerance};

const Z_LO: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 60;

/// Output of [`solve_critical`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub q_c: OverlapVector,
    pub beta_c: f64,
    pub e_star: f64,
    pub phi_qc: f64,
    pub z_root: f64,
}

impl CriticalPoint {
    /// `A★ = E★ − √Φ(q_c)`.
    pub fn a_star(&self) -> f64 {
        self.e_star - self.phi_qc.sqrt()
    }
}

fn check_species(model: &ModelSpec, s: usize) -> Result<()> {
    if s >= model.num_species() {
        return Err(Error::DimensionMismatch {
            expected: model.num_species(),
            got: s + 1,
        });
    }
    Ok(())
}

/// `f_s(x) = (λ(s)/p(s))·x²/(1−x)` on `[0,1)`.
pub fn f_species(model: &ModelSpec, s: usize, x: f64) -> Result<f64> {
    check_species(model, s)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("f_s needs x in [0,1), got {x}")));
    }
    Ok(ratio(model, s) * x * x / (1.0 - x))
}

/// Root `x ∈ [0,1)` of `f_s(x) = z`.
pub fn f_species_inverse(model: &ModelSpec, s: usize, z: f64) -> Result<f64> {
    check_species(model, s)?;
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("f_s inverse needs z >= 0, got {z}")));
    }
    Ok(inverse_parts(z / ratio(model, s)).0)
}

fn ratio(model: &ModelSpec, s: usize) -> f64 {
    model.lambda()[s] / model.degrees()[s] as f64
}

/// Positive root of `x² + c·x − c = 0`, returned as `(x, 1 − x)` in forms
/// free of cancellation at both ends of `c ∈ [0, ∞)`.
fn inverse_parts(c: f64) -> (f64, f64) {
    if c == 0.0 {
        return (0.0, 1.0);
    }
    let denom = c + (c * c + 4.0 * c).sqrt();
    let x = 2.0 * c / denom;
    let one_minus = 4.0 * c / (denom * denom);
    (x, one_minus)
}

/// `q_z` together with `1 − q_z`, species by species.
fn q_of_z(model: &ModelSpec, z: f64) -> (Vec<f64>, Vec<f64>) {
    (0..model.num_species())
        .map(|s| inverse_parts(z / ratio(model, s)))
        .unzip()
}

/// The curve `z ↦ q_z`.
pub fn q_z(model: &ModelSpec, z: f64) -> Result<OverlapVector> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("q_z needs z >= 0, got {z}")));
    }
    Ok(OverlapVector(q_of_z(model, z).0))
}

/// `(g(z), g'(z))`.
pub fn g_and_derivative(model: &ModelSpec, z: f64) -> Result<(f64, f64)> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("g needs z >= 0, got {z}")));
    }
    Ok(g_pair(model, z))
}

fn g_pair(model: &ModelSpec, z: f64) -> (f64, f64) {
    let (q, one_minus) = q_of_z(model, z);
    let mut g = z;
    let mut dg = 1.0;
    for s in 0..model.num_species() {
        let l = model.lambda()[s];
        g += l * (q[s] + one_minus[s].ln());
        dg -= model.degrees()[s] as f64 * one_minus[s] / (1.0 + one_minus[s]);
    }
    (g, dg)
}

/// Solve for the critical point of a model with `|p| ≥ 3`.
pub fn solve_critical(model: &ModelSpec) -> Result<CriticalPoint> {
    if model.total_degree() < 3 {
        return Err(Error::Unsupported(format!(
            "|p| = {} has no positive critical root; use the bipartite closed forms",
            model.total_degree()
        )));
    }
    let z_root = find_g_root(model, 1.0)?;
    let (q, _) = q_of_z(model, z_root);
    let pot = model.potentials(&q)?;
    let xi = model.xi_unchecked(&q);
    let cp = CriticalPoint {
        beta_c: (pot.phi / xi).sqrt(),
        e_star: pot.omega.sqrt(),
        phi_qc: pot.phi,
        q_c: OverlapVector(q),
        z_root,
    };
    log::debug!(
        "critical point: z = {z_root:e}, beta_c = {}, e_star = {}",
        cp.beta_c,
        cp.e_star
    );
    Ok(cp)
}

/// Positive root of `g`, expanding the upper bracket by doubling from `z_hi`.
pub(crate) fn find_g_root(model: &ModelSpec, z_hi_start: f64) -> Result<f64> {
    let g = |z: f64| g_pair(model, z).0;
    let g_lo = g(Z_LO);
    if !(g_lo < 0.0) {
        return Err(Error::Numerical(format!(
            "g({Z_LO:e}) = {g_lo:e} is not negative; bracket cannot start"
        )));
    }
    let mut z_hi = z_hi_start;
    let mut doublings = 0;
    while g(z_hi) <= 0.0 {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Numerical(format!(
                "bracket expansion for g failed: g({z_hi:e}) still non-positive after {MAX_DOUBLINGS} doublings"
            )));
        }
        z_hi *= 2.0;
    }
    brent(g, Z_LO, z_hi, Tolerance::default())
}

/// Residuals of the stationarity system at `(β, q, E)`.
///
/// `per_species[s]` is the per-species residual of
/// `λ/(1−q) + β²ξ(−p(1−q)/q² + (p/q)Σ_t p(1−q)/q) = βE√ξ·p/q`;
/// `scalar` holds the two equalities of
/// `β²ξ(1 + Σ_t p(1−q)/q) = V(q) = βE√ξ`. Each is normalized by its left side.
///
/// Above `β_c` only the per-species equations hold; the scalar pair is
/// specific to the critical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalResiduals {
    pub per_species: Vec<f64>,
    pub scalar: [f64; 2],
}

impl CriticalResiduals {
    pub fn max(&self) -> f64 {
        self.per_species
            .iter()
            .chain(&self.scalar)
            .fold(0.0f64, |m, &r| m.max(r))
    }
}

fn rel(lhs: f64, rhs: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    if lhs == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / lhs.abs()
    }
}

pub fn critical_residuals(
    model: &ModelSpec,
    beta: f64,
    q: &[f64],
    e: f64,
) -> Result<CriticalResiduals> {
    let pot = model.potentials(q)?;
    let xi = model.xi_unchecked(q);
    let sqrt_xi = xi.sqrt();
    let p = model.degrees();
    let lambda = model.lambda();
    let u_sum: f64 = (0..q.len())
        .map(|t| p[t] as f64 * (1.0 - q[t]) / q[t])
        .sum();
    let b2xi = beta * beta * xi;

    let per_species = (0..q.len())
        .map(|s| {
            let ps = p[s] as f64;
            let lhs = lambda[s] / (1.0 - q[s])
                + b2xi * (-ps * (1.0 - q[s]) / (q[s] * q[s]) + ps / q[s] * u_sum);
            let rhs = beta * e * sqrt_xi * ps / q[s];
            rel(lhs, rhs)
        })
        .collect();
    let first = b2xi * (1.0 + u_sum);
    let scalar = [rel(first, pot.v), rel(pot.v, beta * e * sqrt_xi)];
    Ok(CriticalResiduals {
        per_species,
        scalar,
    })
}

/// Per-species residual `|f_s(q(s)) − Φ(q)| / Φ(q)` of the defining system
/// of the critical overlap.
pub fn overlap_system_residuals(model: &ModelSpec, q: &[f64]) -> Result<Vec<f64>> {
    let phi = model.potentials(q)?.phi;
    (0..q.len())
        .map(|s| Ok((f_species(model, s, q[s])? - phi).abs() / phi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(lambda: &[f64], p: &[u32]) -> ModelSpec {
        ModelSpec::from_parts(lambda, p).unwrap()
    }

    fn bisection_oracle<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == (f(lo) < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn f_species_examples() {
        let m = model(&[0.5, 0.5], &[1, 2]);
        assert_relative_eq!(f_species(&m, 0, 0.5).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(f_species(&m, 1, 0.5).unwrap(), 0.125, epsilon = 1e-15);
        assert_eq!(f_species(&m, 0, 0.0).unwrap(), 0.0);
        assert!(matches!(f_species(&m, 0, 1.0), Err(Error::Domain(_))));
        assert!(f_species(&m, 2, 0.5).is_err());
    }

    #[test]
    fn f_species_inverse_examples() {
        let m = model(&[0.5, 0.5], &[1, 2]);
        assert_relative_eq!(
            f_species_inverse(&m, 0, 0.25).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(f_species_inverse(&m, 0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            f_species_inverse(&m, 0, -1.0),
            Err(Error::Domain(_))
        ));

        let m = model(&[1.0 / 3.0, 2.0 / 3.0], &[3, 1]);
        let x = f_species_inverse(&m, 0, 1.0).unwrap();
        let oracle = bisection_oracle(|x| (1.0 / 9.0) * x * x / (1.0 - x) - 1.0, 0.0, 1.0 - 1e-15);
        assert_relative_eq!(x, oracle, epsilon = 1e-12);
        assert!((f_species(&m, 0, x).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn f_species_round_trip_over_scales() {
        let m = model(&[0.3, 0.7], &[2, 3]);
        for k in -12..=12 {
            let z = 10f64.powi(k);
            for s in 0..2 {
                let c = z / ratio(&m, s);
                let (x, one_minus) = inverse_parts(c);
                // forward map evaluated with the exact complement
                let back = ratio(&m, s) * x * x / one_minus;
                assert!((back - z).abs() <= 1e-12 * z.max(1.0), "z={z} back={back}");
                assert!((x + one_minus - 1.0).abs() <= 1e-15);
                if k <= 2 {
                    let x = f_species_inverse(&m, s, z).unwrap();
                    let back = f_species(&m, s, x).unwrap();
                    assert!((back - z).abs() <= 1e-12 * z.max(1.0), "z={z} back={back}");
                }
            }
        }
    }

    #[test]
    fn g_at_origin_and_slope() {
        for (lambda, p) in [
            (&[0.5, 0.5][..], &[2u32, 1][..]),
            (&[0.2, 0.3, 0.5], &[1, 1, 1]),
            (&[0.5, 0.5], &[1, 1]),
        ] {
            let m = model(lambda, p);
            let (g0, _) = g_and_derivative(&m, 0.0).unwrap();
            assert_eq!(g0, 0.0);
            let (_, dg) = g_and_derivative(&m, 1e-14).unwrap();
            let expected = 1.0 - m.total_degree() as f64 / 2.0;
            assert!((dg - expected).abs() < 1e-5);
        }
    }

    #[test]
    fn g_derivative_matches_central_difference() {
        let m = model(&[0.5, 0.5], &[2, 1]);
        let z = 0.3;
        let h = 1e-6;
        let (_, dg) = g_and_derivative(&m, z).unwrap();
        let fd = (g_and_derivative(&m, z + h).unwrap().0 - g_and_derivative(&m, z - h).unwrap().0)
            / (2.0 * h);
        assert!((dg - fd).abs() < 1e-6);
    }

    #[test]
    fn rejects_bipartite() {
        let m = model(&[0.5, 0.5], &[1, 1]);
        assert!(matches!(solve_critical(&m), Err(Error::Unsupported(_))));
    }

    /// Solves `f_s(q_s) = Φ(q)` as a 2-D system in log form (which excludes
    /// the trivial branch `q → 0`): grid search, then Newton with a
    /// finite-difference Jacobian. Independent of the `z` parametrization.
    fn two_species_newton_oracle(m: &ModelSpec) -> [f64; 2] {
        let resid = |q: [f64; 2]| -> [f64; 2] {
            let phi = m.potentials(&q).unwrap().phi;
            let f = |s: usize| m.lambda()[s] / m.degrees()[s] as f64 * q[s] * q[s] / (1.0 - q[s]);
            [(f(0) / phi).ln(), (f(1) / phi).ln()]
        };
        let mut best = [0.5, 0.5];
        let mut best_norm = f64::INFINITY;
        // stay clear of the trivial branch at the origin
        for i in 20..200 {
            for j in 20..200 {
                let q = [i as f64 / 200.0, j as f64 / 200.0];
                let r = resid(q);
                let n = r[0].hypot(r[1]);
                if n < best_norm {
                    best_norm = n;
                    best = q;
                }
            }
        }
        let mut q = best;
        for _ in 0..50 {
            let r = resid(q);
            let h = 1e-7 * q[0].min(q[1]);
            let mut jac = [[0.0; 2]; 2];
            for c in 0..2 {
                let mut qp = q;
                let mut qm = q;
                qp[c] += h;
                qm[c] -= h;
                let (rp, rm) = (resid(qp), resid(qm));
                for r_ in 0..2 {
                    jac[r_][c] = (rp[r_] - rm[r_]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let dx0 = (r[0] * jac[1][1] - r[1] * jac[0][1]) / det;
            let dx1 = (jac[0][0] * r[1] - jac[1][0] * r[0]) / det;
            let mut step = 1.0;
            let mut next = [q[0] - dx0, q[1] - dx1];
            while !next.iter().all(|&x| x > 0.0 && x < 1.0) {
                step *= 0.5;
                next = [q[0] - step * dx0, q[1] - step * dx1];
            }
            q = next;
        }
        q
    }

    #[test]
    fn critical_overlap_matches_direct_newton_oracle() {
        let m = model(&[0.5, 0.5], &[2, 1]);
        let cp = solve_critical(&m).unwrap();
        let oracle = two_species_newton_oracle(&m);
        assert_relative_eq!(cp.q_c[0], oracle[0], epsilon = 1e-9);
        assert_relative_eq!(cp.q_c[1], oracle[1], epsilon = 1e-9);
        for r in overlap_system_residuals(&m, &cp.q_c).unwrap() {
            assert!(r < 1e-9);
        }
    }

    #[test]
    fn three_species_root_matches_bisection_oracle() {
        let m = model(&[0.2, 0.3, 0.5], &[1, 1, 1]);
        let cp = solve_critical(&m).unwrap();
        let g = |z: f64| g_and_derivative(&m, z).unwrap().0;
        let mut hi = 1.0;
        while g(hi) <= 0.0 {
            hi *= 2.0;
        }
        let oracle = bisection_oracle(g, 1e-9, hi);
        assert_relative_eq!(cp.z_root, oracle, max_relative = 1e-10);
        assert!(g(cp.z_root).abs() < 1e-12);
        for r in overlap_system_residuals(&m, &cp.q_c).unwrap() {
            assert!(r < 1e-9);
        }
        assert!(
            critical_residuals(&m, cp.beta_c, &cp.q_c, cp.e_star)
                .unwrap()
                .max()
                < 1e-9
        );
    }

    #[test]
    fn symmetric_model_has_symmetric_overlap() {
        for (s, p) in [(3usize, 1u32), (2, 2), (4, 1), (2, 3)] {
            let lambda = vec![1.0 / s as f64; s];
            let m = ModelSpec::from_parts(&lambda, &vec![p; s]).unwrap();
            let cp = solve_critical(&m).unwrap();
            for v in cp.q_c.iter() {
                assert_relative_eq!(*v, cp.q_c[0], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn critical_point_invariants() {
        let m = model(&[2.0 / 3.0, 1.0 / 3.0], &[2, 1]);
        let cp = solve_critical(&m).unwrap();
        let xi = m.xi(&cp.q_c).unwrap();
        let pot = m.potentials(&cp.q_c).unwrap();
        assert_relative_eq!(cp.beta_c.powi(2) * xi, cp.phi_qc, max_relative = 1e-10);
        assert_relative_eq!(cp.e_star.powi(2), pot.omega, max_relative = 1e-10);
        assert_relative_eq!(
            cp.beta_c * xi.sqrt() * cp.e_star,
            pot.v,
            max_relative = 1e-10
        );
        for s in 0..2 {
            let rhs =
                m.lambda()[s] / m.degrees()[s] as f64 * cp.q_c[s].powi(2) / (1.0 - cp.q_c[s]) / xi;
            assert_relative_eq!(cp.beta_c.powi(2), rhs, max_relative = 1e-9);
        }
    }

    #[test]
    fn residual_probes() {
        let m = model(&[0.5, 0.5], &[2, 1]);
        let cp = solve_critical(&m).unwrap();
        let res = critical_residuals(&m, cp.beta_c, &cp.q_c, cp.e_star).unwrap();
        assert!(res.max() < 1e-9, "{res:?}");

        for s in 0..2 {
            let mut q = cp.q_c.0.clone();
            q[s] += 0.05;
            let res = critical_residuals(&m, cp.beta_c, &q, cp.e_star).unwrap();
            assert!(res.per_species[s] > 1e-3);
        }

        let res = critical_residuals(&m, cp.beta_c, &cp.q_c, 0.0).unwrap();
        assert_eq!(res.scalar[1], 1.0);
    }

    #[test]
    fn bracket_doubling_is_stable() {
        let m = model(&[0.25, 0.35, 0.4], &[2, 1, 3]);
        let a = find_g_root(&m, 1.0).unwrap();
        let b = find_g_root(&m, 2.0).unwrap();
        let c = find_g_root(&m, 1e3).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
        assert_relative_eq!(a, c, max_relative = 1e-10);
    }

    #[test]
    fn g_is_convex_and_q_z_monotone() {
        let m = model(&[0.1, 0.6, 0.3], &[4, 1, 2]);
        let mut prev_dg = f64::NEG_INFINITY;
        let mut prev_q = vec![0.0; 3];
        for i in 0..=180 {
            let z = 10f64.powf(-6.0 + 9.0 * i as f64 / 180.0);
            let (_, dg) = g_and_derivative(&m, z).unwrap();
            assert!(dg >= prev_dg);
            prev_dg = dg;
            let q = q_z(&m, z).unwrap();
            for s in 0..3 {
                assert!(q[s] > prev_q[s]);
            }
            prev_q = q.0;
        }
    }
}
