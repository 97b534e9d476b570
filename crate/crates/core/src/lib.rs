//! Exact limiting thermodynamics of pure multi-species spherical p-spin glasses.
//!
//! A pure model is fixed by per-species proportions `λ(s)` and integer degrees
//! `p(s)`, with mixture polynomial `ξ(x) = Π_s x(s)^p(s)`. The crate computes
//!
//! - the critical overlap `q_c`, critical inverse temperature `β_c` and
//!   ground-state energy `E★` ([`critical`]),
//! - the maximal multi-samplable overlap `q(β)` and free energy `F(β)` above
//!   `β_c` ([`supercritical`]),
//! - closed forms for the bipartite `|p| = 2` model ([`bipartite`]),
//!
//! plus a finite-N Monte Carlo harness ([`mcverify`]) that checks what can be
//! checked at desk scale.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bipartite;
pub mod critical;
pub mod error;
pub mod mcverify;
pub mod model;
pub mod roots;
pub mod supercritical;

pub use bipartite::BipartiteModel;
pub use critical::{solve_critical, CriticalPoint};
pub use error::{Error, Result};
pub use model::{ModelSpec, OverlapVector};
pub use supercritical::{free_energy_at, solve_supercritical, SupercriticalSolution};
