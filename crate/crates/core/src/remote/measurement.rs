use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{SensorModel, SystemModel};
use crate::scheduler::Action;

/// Remote Kalman filter fed directly with raw sensor measurements.
///
/// `estimate`/`cov` hold the prediction for the current step; `post_cov` and
/// `estimate_post` the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasRemoteState {
    pub estimate: Vector,
    pub cov: Matrix,
    pub estimate_post: Vector,
    pub post_cov: Matrix,
}

impl MeasRemoteState {
    pub fn new(estimate: Vector, cov: Matrix) -> Self {
        Self {
            estimate_post: estimate.clone(),
            post_cov: cov.clone(),
            estimate,
            cov,
        }
    }
}

/// Updates with the measurement of the scheduled sensor when it arrives,
/// then predicts. The covariance moves by `g_m` on delivery and by `f`
/// otherwise.
pub fn meas_step(
    state: &MeasRemoteState,
    scheduled: Action,
    gamma: bool,
    measurement: Option<&Vector>,
    model: &SystemModel,
    sensors: &[SensorModel],
) -> Result<MeasRemoteState> {
    let n = model.dim();
    linalg::check_square("cov", &state.cov, n)?;
    linalg::check_len("estimate", &state.estimate, n)?;
    let (estimate_post, post_cov) = match (scheduled, gamma, measurement) {
        (Action::Transmit(m), true, Some(y)) => {
            let sensor = sensors
                .get(m)
                .ok_or_else(|| Error::invalid("scheduled", "sensor index out of range"))?;
            model.check_sensor(sensor)?;
            linalg::check_len("measurement", y, sensor.measurement_dim())?;
            let c = sensor.c();
            let p = &state.cov;
            let pct = p * c.transpose();
            let s = c * &pct + sensor.r();
            let k = linalg::solve_right(&pct, &s)
                .ok_or_else(|| Error::invalid("cov", "innovation covariance is singular"))?;
            let est = &state.estimate + &k * (y - c * &state.estimate);
            let post = linalg::symmetrize(&(p - &k * c * p));
            (est, post)
        }
        (Action::Transmit(_), true, None) => {
            return Err(Error::invalid(
                "measurement",
                "a delivered packet must carry the measurement",
            ))
        }
        (_, _, Some(_)) => {
            return Err(Error::invalid(
                "measurement",
                "nothing can be received without a delivered transmission",
            ))
        }
        _ => (state.estimate.clone(), state.cov.clone()),
    };
    let a = model.a();
    Ok(MeasRemoteState {
        estimate: a * &estimate_post,
        cov: linalg::symmetrize(&(a * &post_cov * a.transpose() + model.q())),
        estimate_post,
        post_cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar;
    use crate::model::{f_map, g_map};

    #[test]
    fn covariance_follows_f_or_g() {
        let m = SystemModel::scalar(1.1, 0.1).unwrap();
        let s = alloc::vec![SensorModel::scalar(1.0, 1.0, 0.8, 1.0).unwrap()];
        let st = MeasRemoteState::new(Vector::zeros(1), scalar(1.0));
        let y = Vector::from_element(1, 0.5);
        let hit = meas_step(&st, Action::Transmit(0), true, Some(&y), &m, &s).unwrap();
        assert!((hit.cov[(0, 0)] - 0.705).abs() < 1e-12);
        assert!(linalg::max_abs(&(&hit.cov - g_map(&st.cov, &m, &s[0]).unwrap())) < 1e-14);
        let miss = meas_step(&st, Action::Transmit(0), false, None, &m, &s).unwrap();
        assert_eq!(miss.cov, f_map(&st.cov, &m).unwrap());
        let idle = meas_step(&st, Action::Idle, false, None, &m, &s).unwrap();
        assert_eq!(idle.cov, miss.cov);
        assert!((hit.estimate_post[0] - 0.25).abs() < 1e-15);
    }
}
