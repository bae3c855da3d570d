//! Numerical kernel for backward doubly stochastic differential equations
//! (BDSDEs) with time-delayed coefficients and multivalued dynamics driven
//! by the subdifferential of a convex function.
//!
//! The crate is organised around the penalization route: the set-valued
//! drift term is replaced by the gradient of the Moreau-Yosida envelope at
//! regularisation level `eps`, the penalized equation is solved by a Picard
//! iteration over an explicit backward time-stepping scheme, and a schedule
//! of decreasing `eps` values is used to probe Cauchy behaviour of the
//! approximations.
//!
//! Module map:
//! - [`prox`]: proximal maps, resolvents, Moreau envelopes and the
//!   semi-implicit resolvent step used by the time stepper.
//! - [`delay`]: delay measures on `[-T, 0)`, delayed-segment functionals and
//!   exponential moments.
//! - [`noise`]: the uniform time grid, the two independent driving noises
//!   (seeded Gaussian and exact Rademacher-tree modes) and the forward /
//!   backward discrete stochastic integrals.
//! - [`engine`]: the Picard solver for the (single-valued) delayed equation
//!   with pluggable conditional-expectation estimators.
//! - [`penalization`]: the eps-schedule driver, limit extraction and the
//!   empirical bound checks.

pub mod delay;
pub mod engine;
pub mod error;
pub mod la;
pub mod noise;
pub mod penalization;
pub mod process;
pub mod prox;

pub use error::{Error, Result};

/// Deterministic, compact float formatting shared by every CSV and manifest
/// writer. Values in a moderate range print as plain decimals, everything
/// else in scientific notation; both forms round-trip.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-4..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

