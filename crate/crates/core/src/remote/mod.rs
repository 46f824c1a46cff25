//! Remote estimators: the optimal estimator tracking cross-covariances with
//! the local filters, the constant-gain estimator, and the estimator used
//! when raw measurements are transmitted.

mod constant_gain;
mod measurement;
mod optimal;

pub use constant_gain::{
    fixed_point_residuals, suboptimal_step, verify_constant_gain_fixed_point, ConstantGainState,
    FixedPointCertificate,
};
pub use measurement::{meas_step, MeasRemoteState};
pub use optimal::{optimal_step, OptimalRemoteState, GAIN_IDENTITY_TOLERANCE};
