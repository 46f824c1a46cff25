use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A linear map that must be a contraction is not.
    #[error("spectral radius {spectral_radius} is not below one")]
    Unstable { spectral_radius: f64 },

    /// The reception probability is too low for a finite average cost.
    #[error(
        "reception probability {lambda} does not exceed the stability bound {bound} \
         (need lambda > 1 - 1/rho(A)^2)"
    )]
    StabilityPrecondition { lambda: f64, bound: f64 },

    #[error("Riccati iteration diverged after {iterations} iterations")]
    Divergence {
        iterations: usize,
        /// Trace of the iterate at a few checkpoints before giving up.
        trace_history: Vec<f64>,
    },

    #[error("iteration did not converge within {iterations} steps (last residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("problem size {required} exceeds the guard limit {limit}")]
    SizeGuard { required: u128, limit: u128 },

    #[error("policy is undefined at state {state}")]
    PolicyCoverage { state: String },

    #[error("non-finite optimal gain for sensor {sensor}")]
    DegenerateGain { sensor: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a mathematical precondition (as opposed to bad input).
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. }
                | Error::StabilityPrecondition { .. }
                | Error::Divergence { .. }
        )
    }
}
