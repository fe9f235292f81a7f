//! Steady-state LQG control under periodic intermittent measurement
//! transmission.
//!
//! A user runs a linear plant and leans on a remote server for state
//! estimation and optimal control, but only forwards every T-th
//! measurement so that the server learns less about the state
//! trajectory. This crate computes the steady-state filter and
//! controller, the periodic covariance orbit induced by the
//! transmission schedule, the privacy gain and control-cost loss of a
//! given period, and the largest period whose loss stays under a
//! budget. A seeded Monte-Carlo simulator and a finite-horizon dynamic
//! program provide independent cross-checks of every closed-form
//! quantity.
//!
//! Module map:
//!
//! * [`model`] — system matrices, structural tests (controllability,
//!   detectability, stabilizability), validation report.
//! * [`riccati`] — the covariance operators `h`, `g̃`, `g`, fixed-point
//!   iteration, steady filter/controller, baseline cost.
//! * [`intermittent`] — the periodic schedule, the covariance cycle and
//!   its fixed point, privacy and loss metrics.
//! * [`optimize`] — period sweeps and the largest-feasible-period
//!   search (bisection with an exhaustive-scan oracle).
//! * [`sim`] — seeded closed-loop Monte-Carlo rollouts and the
//!   finite-horizon backward recursion.

pub mod intermittent;
mod linalg;
pub mod model;
pub mod optimize;
pub mod riccati;
pub mod sim;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Matrix dimensions are mutually inconsistent; the message names
    /// the offending pair.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A field that must be symmetric deviates beyond tolerance.
    #[error("matrix {name} is not symmetric: max |X - X'| entry is {deviation:.3e}")]
    NotSymmetric { name: &'static str, deviation: f64 },

    /// The iteration budget ran out before the residual dropped below
    /// tolerance. Usually signals a model violating the detectability
    /// or stabilizability assumptions, or a tolerance set too tight.
    #[error("fixed-point iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    /// Transmission periods start at 1.
    #[error("transmission period must be at least 1")]
    InvalidPeriod,

    /// `(C, A^T)` fails the detectability test, so the scheduled filter
    /// has no steady covariance orbit for this period.
    #[error("(C, A^{period}) is not detectable: no steady covariance orbit exists for period {period}")]
    DetectabilityViolation { period: u32 },

    /// A period range was empty or started below 1.
    #[error("invalid period range [{t_min}, {t_max}]")]
    InvalidRange { t_min: u32, t_max: u32 },

    /// The control loss is not non-decreasing over the sweep, so
    /// bisection would be unsound; the linear scan still applies.
    #[error("control loss is not non-decreasing over [{t_min}, {t_max}]; bisection needs a monotone sweep")]
    MonotonicityViolation { t_min: u32, t_max: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
