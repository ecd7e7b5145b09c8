//! Adaptive time integrators used by the simulators.
//!
//! [`dopri`] is an explicit embedded Runge-Kutta 5(4) pair for the
//! non-stiff spatially uniform model; [`rosenbrock`] is a linearly implicit,
//! stiffly accurate method for the spectrally discretized glob model.

pub mod dopri;
pub mod rosenbrock;

pub use dopri::{Dopri5, DopriOptions};
pub use rosenbrock::{Rosenbrock, RosenbrockOptions};

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    /// All requested output times were reached.
    Complete,
    /// The caller's stop predicate fired after an accepted step at time `t`.
    Stopped { t: f64 },
}

/// Integration statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
}

/// Weighted RMS norm used for step-size control.
pub(crate) fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let scale = atol + rtol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}
