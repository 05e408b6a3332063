//! Crate-wide error type.

use alloc::vec::Vec;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by constraint sets, solvers and samplers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input vector length does not match the dimension implied by the set
    /// or target.
    DimensionMismatch { expected: usize, got: usize },
    /// A construction invariant was violated (negative radius, crossed box
    /// bounds, non-positive penalty, ...).
    InvalidParameter(&'static str),
    /// The feasible region of a quadratic program is empty. Carries the
    /// inconsistent active set found when infeasibility was detected
    /// (inequality row indices; equality rows are implicitly included).
    Infeasible { conflicting: Vec<usize> },
    /// An iterative routine hit its iteration cap before converging.
    NonConvergence { what: &'static str, iterations: usize },
    /// The majorization-minimization objective increased, which signals a
    /// gradient or prox bug rather than a numerical wobble.
    MmObjectiveIncrease { delta: f64 },
    /// The sampler failed to find a valid starting point.
    InitializationFailed { model: &'static str },
    /// Importance weights collapsed; the tilted-moment estimate at the
    /// requested strength is not trustworthy.
    UnreliableEstimate { weight_ess: f64 },
    /// The expected-distance budget is not smaller than the unconstrained
    /// moment, so the tilting problem has no positive solution.
    CalibrationRefused { unconstrained_moment: f64 },
    /// Bracket expansion for the tilting strength exceeded its cap; the
    /// budget is below Monte Carlo resolution.
    BudgetUnreachable { lambda_cap: f64 },
    /// Two grid densities do not share the same lattice.
    GridMismatch,
    /// Grid bounds truncate non-negligible probability mass.
    GridTruncation { boundary_mass: f64 },
    /// The requested operation is undefined for the sharp penalty flavor.
    SharpFlavorUnsupported,
    /// Not enough draws for the requested summary.
    InsufficientDraws { needed: usize, got: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Infeasible { conflicting } => {
                write!(f, "infeasible constraint system (inconsistent active set {conflicting:?})")
            }
            Error::NonConvergence { what, iterations } => {
                write!(f, "{what} did not converge within {iterations} iterations")
            }
            Error::MmObjectiveIncrease { delta } => {
                write!(f, "MM objective increased by {delta:e}; descent property violated")
            }
            Error::InitializationFailed { model } => {
                write!(f, "failed to initialize a chain for model '{model}' after 100 attempts")
            }
            Error::UnreliableEstimate { weight_ess } => {
                write!(
                    f,
                    "importance-weight ESS {weight_ess:.1} < 50; enlarge the reference sample or use staged tilting"
                )
            }
            Error::CalibrationRefused { unconstrained_moment } => {
                write!(
                    f,
                    "budget exceeds the unconstrained expected half squared distance ({unconstrained_moment:.6})"
                )
            }
            Error::BudgetUnreachable { lambda_cap } => {
                write!(f, "budget unreachable: tilt strength exceeded {lambda_cap:e}")
            }
            Error::GridMismatch => write!(f, "grid densities are defined on different lattices"),
            Error::GridTruncation { boundary_mass } => {
                write!(f, "grid bounds truncate {boundary_mass:e} probability mass at the boundary")
            }
            Error::SharpFlavorUnsupported => {
                write!(f, "operation undefined for the sharp penalty flavor")
            }
            Error::InsufficientDraws { needed, got } => {
                write!(f, "need at least {needed} draws, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
