//! Local Kalman filters running at each sensor.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{g_map, SensorModel, SystemModel};

const RICCATI_TOLERANCE: f64 = 1e-12;
const RICCATI_MAX_ITERATIONS: usize = 1_000_000;
const DIVERGENCE_TRACE: f64 = 1e150;

/// Time-varying filter state. `estimate_prior`/`prior_cov` describe the
/// one-step prediction, `estimate_post`/`post_cov` the last measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFilterState {
    pub prior_cov: Matrix,
    pub post_cov: Matrix,
    pub gain: Matrix,
    pub estimate_prior: Vector,
    pub estimate_post: Vector,
}

impl LocalFilterState {
    /// A filter that has not yet processed a measurement, with prediction
    /// `estimate` and covariance `cov`.
    pub fn new(estimate: Vector, cov: Matrix) -> Self {
        let n = estimate.len();
        Self {
            post_cov: cov.clone(),
            prior_cov: cov,
            gain: Matrix::zeros(n, 0),
            estimate_post: estimate.clone(),
            estimate_prior: estimate,
        }
    }
}

/// Processes measurement `y` against the current prediction and predicts one
/// step ahead. The returned state holds the update for this step and the
/// prediction for the next one.
pub fn kf_step(
    state: &LocalFilterState,
    y: &Vector,
    model: &SystemModel,
    sensor: &SensorModel,
) -> Result<LocalFilterState> {
    let n = model.dim();
    linalg::check_square("prior_cov", &state.prior_cov, n)?;
    linalg::check_len("estimate_prior", &state.estimate_prior, n)?;
    linalg::check_len("y", y, sensor.measurement_dim())?;
    model.check_sensor(sensor)?;

    let c = sensor.c();
    let p = &state.prior_cov;
    let pct = p * c.transpose();
    let innovation_cov = c * &pct + sensor.r();
    let gain = linalg::solve_right(&pct, &innovation_cov)
        .ok_or_else(|| Error::invalid("prior_cov", "innovation covariance is singular"))?;
    let post_cov = linalg::symmetrize(&(p - &gain * c * p));
    let estimate_post = &state.estimate_prior + &gain * (y - c * &state.estimate_prior);

    let a = model.a();
    Ok(LocalFilterState {
        prior_cov: linalg::symmetrize(&(a * &post_cov * a.transpose() + model.q())),
        estimate_prior: a * &estimate_post,
        post_cov,
        gain,
        estimate_post,
    })
}

/// Steady-state quantities of a local filter: prediction covariance, updated
/// covariance and gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateFilter {
    pub prior_cov: Matrix,
    pub post_cov: Matrix,
    pub gain: Matrix,
}

impl SteadyStateFilter {
    /// Constant-gain measurement update of a prediction.
    pub fn update(&self, estimate_prior: &Vector, y: &Vector, sensor: &SensorModel) -> Vector {
        estimate_prior + &self.gain * (y - sensor.c() * estimate_prior)
    }

    /// Largest entry of `g(P) - P` at the stored prediction covariance.
    pub fn riccati_residual(&self, model: &SystemModel, sensor: &SensorModel) -> Result<f64> {
        let next = g_map(&self.prior_cov, model, sensor)?;
        Ok(linalg::max_abs(&(next - &self.prior_cov)))
    }
}

/// Iterates the Riccati recursion from zero to its fixed point.
pub fn dare_steady_state(model: &SystemModel, sensor: &SensorModel) -> Result<SteadyStateFilter> {
    model.check_sensor(sensor)?;
    let n = model.dim();
    let mut p = Matrix::zeros(n, n);
    let mut history = Vec::new();
    let mut checkpoint = 1usize;
    for it in 1..=RICCATI_MAX_ITERATIONS {
        let next = g_map(&p, model, sensor)?;
        let trace = next.trace();
        if it == checkpoint {
            history.push(trace);
            checkpoint *= 2;
        }
        if !trace.is_finite() || trace > DIVERGENCE_TRACE {
            history.push(trace);
            return Err(Error::Divergence {
                iterations: it,
                trace_history: history,
            });
        }
        // relative once entries exceed 1, where 1e-12 drops below the
        // rounding noise of one step
        let delta = linalg::max_abs(&(&next - &p));
        let scale = linalg::max_abs(&next).max(1.0);
        p = next;
        if delta < RICCATI_TOLERANCE * scale {
            return Ok(steady_from_prior(p, sensor));
        }
    }
    history.push(p.trace());
    Err(Error::Divergence {
        iterations: RICCATI_MAX_ITERATIONS,
        trace_history: history,
    })
}

fn steady_from_prior(prior_cov: Matrix, sensor: &SensorModel) -> SteadyStateFilter {
    let c = sensor.c();
    let pct = &prior_cov * c.transpose();
    let innovation_cov = c * &pct + sensor.r();
    // R is positive definite, so the innovation covariance is too.
    let gain = linalg::solve_right(&pct, &innovation_cov)
        .unwrap_or_else(|| Matrix::zeros(pct.nrows(), pct.ncols()));
    let post_cov = linalg::symmetrize(&(&prior_cov - &gain * c * &prior_cov));
    SteadyStateFilter {
        prior_cov,
        post_cov,
        gain,
    }
}

/// Steady-state filters for every sensor, in order.
pub fn steady_state_all(
    model: &SystemModel,
    sensors: &[SensorModel],
) -> Result<Vec<SteadyStateFilter>> {
    sensors.iter().map(|s| dare_steady_state(model, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat, scalar};

    #[test]
    fn scalar_step() {
        let m = SystemModel::scalar(1.1, 1.0).unwrap();
        let s = SensorModel::scalar(1.0, 1.0, 1.0, 0.0).unwrap();
        let st = LocalFilterState::new(Vector::zeros(1), scalar(1.0));
        let out = kf_step(&st, &Vector::from_element(1, 2.0), &m, &s).unwrap();
        assert!((out.post_cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((out.prior_cov[(0, 0)] - 1.605).abs() < 1e-12);
        assert!((out.estimate_post[0] - 1.0).abs() < 1e-15);
        assert!((out.estimate_prior[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn blind_sensor_leaves_covariance_unchanged() {
        let m = SystemModel::new(mat(&[&[0.9, 0.1], &[0.0, 0.5]]), Matrix::identity(2, 2)).unwrap();
        let s = SensorModel::new(mat(&[&[0.0, 0.0]]), scalar(1.0), 1.0, 0.0).unwrap();
        let p = mat(&[&[2.0, 0.3], &[0.3, 1.0]]);
        let st = LocalFilterState::new(Vector::zeros(2), p.clone());
        let out = kf_step(&st, &Vector::from_element(1, 5.0), &m, &s).unwrap();
        assert!(linalg::max_abs(&(out.post_cov - p)) < 1e-15);
    }

    #[test]
    fn memoryless_plant() {
        let q = mat(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let m = SystemModel::new(Matrix::zeros(2, 2), q.clone()).unwrap();
        let c = mat(&[&[1.0, 1.0]]);
        let s = SensorModel::new(c.clone(), scalar(1.0), 1.0, 0.0).unwrap();
        let ss = dare_steady_state(&m, &s).unwrap();
        assert!(linalg::max_abs(&(&ss.prior_cov - &q)) < 1e-12);
        let denom = (&c * &q * c.transpose())[(0, 0)] + 1.0;
        let expected = &q * c.transpose() / denom;
        assert!(linalg::max_abs(&(&ss.gain - expected)) < 1e-12);
    }

    #[test]
    fn undetectable_pair_diverges() {
        let m = SystemModel::scalar(2.0, 1.0).unwrap();
        let s = SensorModel::scalar(0.0, 1.0, 1.0, 0.0).unwrap();
        match dare_steady_state(&m, &s) {
            Err(Error::Divergence { trace_history, .. }) => assert!(!trace_history.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
