//! Numerical toolkit for the half-line reaction-diffusion problem
//!
//! ```text
//! u_t = u_xx + f(u),   x > 0, t > 0,
//! u(0,t) = b u_x(0,t),
//! u(x,0) = u_0(x) >= 0,
//! ```
//!
//! with an unbalanced bistable reaction term `f`. The crate constructs the
//! bounded steady states by phase-plane quadrature, evolves the PDE with an
//! IMEX finite-difference scheme, locates the sharp spreading/vanishing
//! threshold by certified bisection, and verifies the logarithmic drift law
//! of the near-threshold pulse against the reduced motion ODE.

pub mod cli;
pub mod nonlinearity;
pub mod quad;
pub mod solver;
pub mod steady;
pub mod threshold;
pub mod transition;

pub use nonlinearity::{DerivedConstants, Nonlinearity, RegimeLabel, RegimeReport, ValidationReport};
pub use solver::{Field, InitialDatum, RunRecord, Solver, SolverConfig};
pub use steady::{ProfileKind, ShiftSets, SteadyProfile};
pub use threshold::{Outcome, ThresholdResult};
pub use transition::{LogLawFit, ManifoldProfile, PulseTrajectory, ReducedDrift};

/// Unified error type; variants mirror the failure modes of the individual
/// subsystems so callers can match on what actually went wrong.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("F has no zero in (alpha, 1): balanced or degenerate nonlinearity")]
    NoThetaFound,
    #[error("sign pattern of a bistable nonlinearity violated: {0}")]
    NotBistable(String),
    #[error("quadrature failed to reach tolerance {tol:e} on [{a}, {b}] (estimate {err:e})")]
    QuadratureFailure { a: f64, b: f64, tol: f64, err: f64 },
    #[error("derivative of order {0} at u=0 is not available for this nonlinearity")]
    DerivativeUnavailable(u32),
    #[error("profile inversion failed near z = {0}: non-monotone arc, invalid nonlinearity?")]
    InversionFailure(f64),
    #[error("m = {0} outside the admissible range {1}")]
    InvalidM(f64, &'static str),
    #[error("solution exceeded the comparison bound at t = {t}: |u| up to {sup}")]
    NumericalBlowup { t: f64, sup: f64 },
    #[error("negative undershoot {value:e} at x = {x} (t = {t}) beyond the clipping tolerance")]
    NegativeUndershoot { x: f64, t: f64, value: f64 },
    #[error("no initial sigma bracket found below cap {0}")]
    BracketNotFound(f64),
    #[error("drift law does not apply: b*lambda = {0} > 1")]
    RegimeMismatch(f64),
    #[error("valid window [{0}, {1}] spans less than one decade in t")]
    WindowTooShort(f64, f64),
    #[error("manifold profile non-positive at x = {x}: value {value:e} (xi too small for this b)")]
    NegativeProfile { x: f64, value: f64 },
    #[error("time step {dt} too large for reaction accuracy: need dt <= {max_dt}")]
    InvalidTimeStep { dt: f64, max_dt: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
