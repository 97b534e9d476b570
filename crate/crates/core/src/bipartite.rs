//! Closed forms for the bipartite model: two species, `p ≡ 1`.
//!
//! Here `E★ = √λ_s + √λ_t` is the Geman edge of a rectangular Wishart matrix,
//! `β_c = (λ_s λ_t)^{1/4}` and the critical overlap is `q_c ≡ 0`. The general
//! critical solver refuses `|p| = 2`; everything for this model lives here.

use serde::Serialize;

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OverlapVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartiteModel {
    pub lambda_s: f64,
    pub lambda_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartiteCritical {
    pub beta_c: f64,
    pub e_star: f64,
    pub q_c: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartiteOverlap {
    pub q_s: f64,
    pub q_t: f64,
    /// Set when `β ≤ β_c`; the overlap is then `(0, 0)`.
    pub subcritical: bool,
}

impl BipartiteModel {
    pub fn new(lambda_s: f64, lambda_t: f64) -> Result<Self> {
        let ok = |l: f64| l > 0.0 && l < 1.0;
        if !ok(lambda_s) || !ok(lambda_t) || (lambda_s + lambda_t - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "bipartite proportions must lie in (0,1) and sum to 1, got ({lambda_s}, {lambda_t})"
            )));
        }
        Ok(Self { lambda_s, lambda_t })
    }

    pub fn from_spec(model: &ModelSpec) -> Result<Self> {
        if model.num_species() != 2 || model.degrees() != [1, 1] {
            return Err(Error::InvalidModel(
                "the bipartite path needs exactly two species of degree 1".into(),
            ));
        }
        Self::new(model.lambda()[0], model.lambda()[1])
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec::new(
            vec!["s".into(), "t".into()],
            vec![self.lambda_s, self.lambda_t],
            vec![1, 1],
        )
        .expect("validated proportions")
    }

    fn roots(&self) -> (f64, f64) {
        (self.lambda_s.sqrt(), self.lambda_t.sqrt())
    }

    /// `√((√λ_s − √λ_t)² + 4β²)`.
    fn radical(&self, beta: f64) -> f64 {
        let (a, b) = self.roots();
        ((a - b).powi(2) + 4.0 * beta * beta).sqrt()
    }

    pub fn beta_c(&self) -> f64 {
        (self.lambda_s * self.lambda_t).powf(0.25)
    }

    pub fn e_star(&self) -> f64 {
        let (a, b) = self.roots();
        a + b
    }

    pub fn critical(&self) -> BipartiteCritical {
        BipartiteCritical {
            beta_c: self.beta_c(),
            e_star: self.e_star(),
            q_c: [0.0, 0.0],
        }
    }

    /// The critical data in the form the general supercritical solver takes:
    /// `Φ(q_c) = Φ(0) = 0`, hence `A★ = E★`.
    pub fn critical_point(&self) -> CriticalPoint {
        CriticalPoint {
            q_c: OverlapVector(vec![0.0, 0.0]),
            beta_c: self.beta_c(),
            e_star: self.e_star(),
            phi_qc: 0.0,
            z_root: 0.0,
        }
    }

    pub fn overlap(&self, beta: f64) -> BipartiteOverlap {
        if !(beta > self.beta_c()) {
            return BipartiteOverlap {
                q_s: 0.0,
                q_t: 0.0,
                subcritical: true,
            };
        }
        let (a, b) = self.roots();
        let d = self.radical(beta);
        let num = d - a - b;
        BipartiteOverlap {
            q_s: num / (a - b + d),
            q_t: num / (b - a + d),
            subcritical: false,
        }
    }

    pub fn free_energy(&self, beta: f64) -> f64 {
        if !(beta > self.beta_c()) {
            return 0.5 * beta * beta;
        }
        let (ls, lt) = (self.lambda_s, self.lambda_t);
        let (a, b) = self.roots();
        let d = self.radical(beta);
        let first = 0.5 * (-1.0 - (ls * lt).sqrt() + (a + b) * d);
        let second = -(ls - lt) / 4.0 * ((a - b + d) / (b - a + d)).ln();
        let third = -0.5 * beta.ln() + 0.25 * ls * ls.ln() + 0.25 * lt * lt.ln();
        first + second + third
    }

    /// `κ(β) = (√λ_s + √λ_t)·√((√λ_s − √λ_t)² + 4β²) − 1 − 2β²` and `κ'(β)`.
    pub fn kappa(&self, beta: f64) -> (f64, f64) {
        let (a, b) = self.roots();
        let d = self.radical(beta);
        let value = (a + b) * d - 1.0 - 2.0 * beta * beta;
        let slope = 4.0 * beta * ((a + b) / d - 1.0);
        (value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supercritical::{solve_supercritical, theta};
    use approx::assert_relative_eq;

    #[test]
    #[allow(clippy::approx_constant)]
    fn symmetric_critical_values() {
        let m = BipartiteModel::new(0.5, 0.5).unwrap();
        let c = m.critical();
        assert!((c.e_star - 2f64.sqrt()).abs() <= 1e-12);
        assert!((c.beta_c - 0.5f64.sqrt()).abs() <= 1e-12);
        assert_eq!(c.q_c, [0.0, 0.0]);
        assert_relative_eq!(c.e_star, 1.414214, epsilon = 1e-6);
        assert_relative_eq!(c.beta_c, 0.707107, epsilon = 1e-6);
    }

    #[test]
    fn asymmetric_critical_values() {
        let m = BipartiteModel::new(0.25, 0.75).unwrap();
        assert_relative_eq!(m.e_star(), 0.5 + 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(m.beta_c(), (3.0f64 / 16.0).powf(0.25), epsilon = 1e-15);
    }

    #[test]
    fn kappa_vanishes_flat_at_beta_c() {
        for (ls, lt) in [(0.5, 0.5), (0.25, 0.75), (0.1, 0.9)] {
            let m = BipartiteModel::new(ls, lt).unwrap();
            let (k, dk) = m.kappa(m.beta_c());
            assert!(k.abs() < 1e-14, "kappa = {k}");
            assert!(dk.abs() < 1e-14, "kappa' = {dk}");
            assert!(m.kappa(m.beta_c() / 2.0).0 < 0.0);
            assert!(m.kappa(2.0 * m.beta_c()).0 < 0.0);
            let (k0, _) = m.kappa(0.0);
            assert_relative_eq!(k0, (ls - lt).abs() - 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn kappa_slope_matches_finite_difference() {
        let m = BipartiteModel::new(0.3, 0.7).unwrap();
        for beta in [0.2, 0.6, 1.5] {
            let h = 1e-6;
            let fd = (m.kappa(beta + h).0 - m.kappa(beta - h).0) / (2.0 * h);
            assert!((m.kappa(beta).1 - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn symmetric_overlap_at_sqrt_two() {
        let m = BipartiteModel::new(0.5, 0.5).unwrap();
        let q = m.overlap(2f64.sqrt());
        assert!(!q.subcritical);
        assert_relative_eq!(q.q_s, 0.5, epsilon = 1e-15);
        assert_relative_eq!(q.q_t, 0.5, epsilon = 1e-15);
        let sub = m.overlap(0.5);
        assert!(sub.subcritical);
        assert_eq!((sub.q_s, sub.q_t), (0.0, 0.0));
        let near = m.overlap(m.beta_c() * (1.0 + 1e-10));
        assert!(near.q_s < 1e-9 && near.q_t < 1e-9);
    }

    #[test]
    fn free_energy_values() {
        let m = BipartiteModel::new(0.5, 0.5).unwrap();
        let f = m.free_energy(2f64.sqrt());
        assert_relative_eq!(f, 1.25 - 0.5 * 2f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(f, 0.903426, epsilon = 1e-6);
        assert_eq!(m.free_energy(0.5), 0.125);
    }

    #[test]
    fn free_energy_continuous_and_below_annealed() {
        for (ls, lt) in [(0.5, 0.5), (0.2, 0.8), (0.35, 0.65)] {
            let m = BipartiteModel::new(ls, lt).unwrap();
            let bc = m.beta_c();
            assert!((m.free_energy(bc + 1e-8) - 0.5 * bc * bc).abs() < 1e-6);
            for k in 1..=20 {
                let beta = bc * (1.0 + 0.2 * k as f64);
                assert!(m.free_energy(beta) <= 0.5 * beta * beta);
            }
        }
    }

    #[test]
    fn xi_q_one_relation() {
        let m = BipartiteModel::new(0.3, 0.7).unwrap();
        for beta in [0.8, 1.0, 2.5] {
            let q = m.overlap(beta);
            let lhs = (1.0 - q.q_s) * (1.0 - q.q_t);
            let rhs = (0.3f64 * 0.7).sqrt() / (beta * beta);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn theta_at_origin_is_e_star() {
        let m = BipartiteModel::new(0.25, 0.75).unwrap();
        assert_relative_eq!(theta(&m.to_spec(), 0.0).value, m.e_star(), epsilon = 1e-15);
    }

    #[test]
    fn matches_general_supercritical_path() {
        let m = BipartiteModel::new(0.25, 0.75).unwrap();
        let spec = m.to_spec();
        let cp = m.critical_point();
        assert_eq!(cp.a_star(), cp.e_star);
        let sol = solve_supercritical(&spec, &cp, 2.0).unwrap();
        let q = m.overlap(2.0);
        assert_relative_eq!(sol.q[0], q.q_s, max_relative = 1e-12);
        assert_relative_eq!(sol.q[1], q.q_t, max_relative = 1e-12);
        assert_relative_eq!(sol.free_energy, m.free_energy(2.0), max_relative = 1e-12);
    }

    #[test]
    fn from_spec_validates_shape() {
        let spec = ModelSpec::from_parts(&[0.5, 0.5], &[2, 1]).unwrap();
        assert!(BipartiteModel::from_spec(&spec).is_err());
        assert!(BipartiteModel::new(0.6, 0.5).is_err());
    }
}
