use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{SensorModel, SystemModel};
use crate::scheduler::Action;

/// Relative Frobenius tolerance for switching to the identity gain.
pub const GAIN_IDENTITY_TOLERANCE: f64 = 1e-9;

/// Relative eigenvalue cutoff of the gain's pseudo-inverse. Right after a
/// delivery from sensor `s` the remote and local errors coincide and the
/// innovation covariance shrinks to `K_s R_s K_s^T`, which is rank-deficient
/// whenever the measurement is smaller than the state.
pub const GAIN_RANK_TOLERANCE: f64 = 1e-12;

/// Optimal remote estimator state at time `k`.
///
/// `estimate` and `prior_cov` are the prediction for the current step;
/// `cross_cov[m]` is `P_{0m}` and `pair_cov[m][n]` is `P_{mn}`, both taken
/// before the current update. `estimate_post`, `post_cov` and `gain` hold the
/// last update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalRemoteState {
    pub estimate: Vector,
    pub prior_cov: Matrix,
    pub estimate_post: Vector,
    pub post_cov: Matrix,
    pub cross_cov: Vec<Matrix>,
    pub pair_cov: Vec<Vec<Matrix>>,
    pub gain: Option<Matrix>,
}

impl OptimalRemoteState {
    pub fn new(
        estimate: Vector,
        prior_cov: Matrix,
        cross_cov: Vec<Matrix>,
        pair_cov: Vec<Vec<Matrix>>,
    ) -> Result<Self> {
        let n = prior_cov.nrows();
        linalg::check_square("prior_cov", &prior_cov, n)?;
        linalg::check_len("estimate", &estimate, n)?;
        let m = cross_cov.len();
        if pair_cov.len() != m || pair_cov.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "pair_cov",
                expected: (m, m),
                found: (pair_cov.len(), pair_cov.first().map_or(0, Vec::len)),
            });
        }
        for c in &cross_cov {
            linalg::check_square("cross_cov", c, n)?;
        }
        for p in pair_cov.iter().flatten() {
            linalg::check_square("pair_cov", p, n)?;
        }
        Ok(Self {
            estimate_post: estimate.clone(),
            post_cov: prior_cov.clone(),
            estimate,
            prior_cov,
            cross_cov,
            pair_cov,
            gain: None,
        })
    }

    /// Remote and local prediction errors start mutually independent.
    pub fn independent(estimate: Vector, prior_cov: Matrix, local_priors: &[Matrix]) -> Result<Self> {
        let n = prior_cov.nrows();
        let m = local_priors.len();
        let cross = alloc::vec![Matrix::zeros(n, n); m];
        let pair = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            local_priors[i].clone()
                        } else {
                            Matrix::zeros(n, n)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(estimate, prior_cov, cross, pair)
    }

    pub fn sensors(&self) -> usize {
        self.cross_cov.len()
    }

    /// Joint covariance of the remote and all local prediction errors.
    pub fn joint_cov(&self) -> Matrix {
        let n = self.prior_cov.nrows();
        let m = self.sensors();
        let mut out = Matrix::zeros((m + 1) * n, (m + 1) * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.prior_cov);
        for i in 0..m {
            out.view_mut((0, (i + 1) * n), (n, n)).copy_from(&self.cross_cov[i]);
            out.view_mut(((i + 1) * n, 0), (n, n))
                .copy_from(&self.cross_cov[i].transpose());
            for j in 0..m {
                out.view_mut(((i + 1) * n, (j + 1) * n), (n, n))
                    .copy_from(&self.pair_cov[i][j]);
            }
        }
        out
    }
}

/// One step of the optimal remote estimator.
///
/// `local_gains[m]` is the local Kalman gain of sensor `m` at this step and
/// `received` the local updated estimate of the scheduled sensor, present
/// exactly when its packet arrived.
pub fn optimal_step(
    state: &OptimalRemoteState,
    scheduled: Action,
    gamma: bool,
    received: Option<&Vector>,
    local_gains: &[Matrix],
    model: &SystemModel,
    sensors: &[SensorModel],
) -> Result<OptimalRemoteState> {
    let n = model.dim();
    let count = sensors.len();
    if state.sensors() != count || local_gains.len() != count {
        return Err(Error::DimensionMismatch {
            context: "sensor count",
            expected: (count, 1),
            found: (state.sensors(), local_gains.len()),
        });
    }
    linalg::check_square("prior_cov", &state.prior_cov, n)?;
    let success = match scheduled {
        Action::Transmit(m) if m >= count => {
            return Err(Error::invalid("scheduled", "sensor index out of range"))
        }
        Action::Transmit(m) if gamma => Some(m),
        _ => None,
    };
    if success.is_some() != received.is_some() {
        return Err(Error::invalid(
            "received",
            "a local estimate is delivered exactly when the scheduled packet arrives",
        ));
    }

    let a = model.a();
    let eye = Matrix::identity(n, n);
    let innovation: Vec<Matrix> = sensors
        .iter()
        .zip(local_gains)
        .map(|(s, k)| &eye - k * s.c())
        .collect();

    let p = &state.prior_cov;
    let (post_cov, estimate_post, gain) = match (success, received) {
        (Some(s), Some(xs)) => {
            let l = &innovation[s];
            let ks = &local_gains[s];
            let p0 = &state.cross_cov[s];
            let ps = &state.pair_cov[s][s];
            let noise = ks * sensors[s].r() * ks.transpose();
            let num = p - p0 * l.transpose();
            let den = &num - l * p0.transpose() + l * ps * l.transpose() + &noise;
            let dist = (&den - &num).norm();
            let k = if dist <= GAIN_IDENTITY_TOLERANCE * den.norm().max(1.0) {
                eye.clone()
            } else {
                linalg::psd_solve_right(&num, &den, GAIN_RANK_TOLERANCE).ok_or(Error::DegenerateGain { sensor: s })?
            };
            let j = &eye - &k;
            let post = &j * p * j.transpose()
                + &j * p0 * l.transpose() * k.transpose()
                + &k * l * p0.transpose() * j.transpose()
                + &k * l * ps * l.transpose() * k.transpose()
                + &k * &noise * k.transpose();
            let est = &state.estimate + &k * (xs - &state.estimate);
            (linalg::symmetrize(&post), est, Some(k))
        }
        _ => (p.clone(), state.estimate.clone(), None),
    };

    // Augmented error recursion over (remote, local_1, ..., local_M).
    let dim = (count + 1) * n;
    let mut big_a = Matrix::zeros(dim, dim);
    match (&gain, success) {
        (Some(k), Some(s)) => {
            big_a
                .view_mut((0, 0), (n, n))
                .copy_from(&(a * (&eye - k)));
            big_a
                .view_mut((0, (s + 1) * n), (n, n))
                .copy_from(&(a * k * &innovation[s]));
        }
        _ => big_a.view_mut((0, 0), (n, n)).copy_from(a),
    }
    for m in 0..count {
        big_a
            .view_mut(((m + 1) * n, (m + 1) * n), (n, n))
            .copy_from(&(a * &innovation[m]));
    }
    let mut next = &big_a * state.joint_cov() * big_a.transpose();
    for i in 0..=count {
        for j in 0..=count {
            let mut block = next.view_mut((i * n, j * n), (n, n));
            block += model.q();
        }
    }
    for (m, sensor) in sensors.iter().enumerate() {
        let p_m = sensor.measurement_dim();
        let mut b = Matrix::zeros(dim, p_m);
        let aks = a * &local_gains[m];
        if let (Some(k), Some(s)) = (&gain, success) {
            if s == m {
                b.view_mut((0, 0), (n, p_m)).copy_from(&(a * k * &local_gains[m]));
            }
        }
        b.view_mut(((m + 1) * n, 0), (n, p_m)).copy_from(&aks);
        next += &b * sensor.r() * b.transpose();
    }
    let next = linalg::symmetrize(&next);

    let cross_cov = (0..count)
        .map(|m| next.view((0, (m + 1) * n), (n, n)).into_owned())
        .collect();
    let pair_cov = (0..count)
        .map(|i| {
            (0..count)
                .map(|j| next.view(((i + 1) * n, (j + 1) * n), (n, n)).into_owned())
                .collect()
        })
        .collect();
    Ok(OptimalRemoteState {
        estimate: a * &estimate_post,
        prior_cov: next.view((0, 0), (n, n)).into_owned(),
        estimate_post,
        post_cov,
        cross_cov,
        pair_cov,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat, scalar};
    use crate::localfilter::dare_steady_state;
    use crate::model::f_map;

    fn setup() -> (SystemModel, Vec<SensorModel>) {
        let m = SystemModel::new(mat(&[&[1.1, 0.2], &[0.2, 0.8]]), Matrix::identity(2, 2)).unwrap();
        let s1 = SensorModel::new(mat(&[&[1.0, 1.0]]), scalar(1.0), 0.8, 1.0).unwrap();
        let s2 = SensorModel::new(mat(&[&[1.0, -0.5]]), scalar(2.0), 0.6, 1.0).unwrap();
        (m, alloc::vec![s1, s2])
    }

    #[test]
    fn idle_step_predicts() {
        let (m, s) = setup();
        let ss: Vec<_> = s.iter().map(|x| dare_steady_state(&m, x).unwrap()).collect();
        let gains: Vec<_> = ss.iter().map(|f| f.gain.clone()).collect();
        let priors: Vec<_> = ss.iter().map(|f| f.prior_cov.clone()).collect();
        let p = mat(&[&[3.0, 0.5], &[0.5, 2.0]]);
        let st = OptimalRemoteState::independent(Vector::zeros(2), p.clone(), &priors).unwrap();
        let out = optimal_step(&st, Action::Idle, true, None, &gains, &m, &s).unwrap();
        assert_eq!(out.post_cov, p);
        assert!(linalg::max_abs(&(out.prior_cov - f_map(&p, &m).unwrap())) < 1e-12);
        for k in 0..2 {
            assert!(linalg::max_abs(&(&out.pair_cov[k][k] - &priors[k])) < 1e-9);
        }
    }

    #[test]
    fn delivered_steady_state_estimate_uses_identity_gain() {
        let (m, s) = setup();
        let s = alloc::vec![s[0].clone()];
        let ss = dare_steady_state(&m, &s[0]).unwrap();
        let st = OptimalRemoteState::new(
            Vector::zeros(2),
            f_map(&ss.post_cov, &m).unwrap(),
            alloc::vec![ss.prior_cov.clone()],
            alloc::vec![alloc::vec![ss.prior_cov.clone()]],
        )
        .unwrap();
        let xs = Vector::from_vec(alloc::vec![0.3, -0.2]);
        let out = optimal_step(
            &st,
            Action::Transmit(0),
            true,
            Some(&xs),
            &[ss.gain.clone()],
            &m,
            &s,
        )
        .unwrap();
        assert_eq!(out.gain, Some(Matrix::identity(2, 2)));
        assert!(linalg::max_abs(&(&out.post_cov - &ss.post_cov)) < 1e-9);
        assert_eq!(out.estimate_post, xs);
    }

    #[test]
    fn prediction_block_matches_post_covariance() {
        let (m, s) = setup();
        let ss: Vec<_> = s.iter().map(|x| dare_steady_state(&m, x).unwrap()).collect();
        let gains: Vec<_> = ss.iter().map(|f| f.gain.clone()).collect();
        let priors: Vec<_> = ss.iter().map(|f| f.prior_cov.clone()).collect();
        let st = OptimalRemoteState::independent(
            Vector::zeros(2),
            mat(&[&[3.0, 0.5], &[0.5, 2.0]]),
            &priors,
        )
        .unwrap();
        let xs = Vector::from_vec(alloc::vec![1.0, 1.0]);
        let out = optimal_step(&st, Action::Transmit(1), true, Some(&xs), &gains, &m, &s).unwrap();
        let k = out.gain.clone().unwrap();
        assert!(linalg::max_abs(&(&k - Matrix::identity(2, 2))) > 1e-6);
        let expected = f_map(&out.post_cov, &m).unwrap();
        assert!(linalg::max_abs(&(&out.prior_cov - expected)) < 1e-10);
        assert!(linalg::is_psd(&(&st.prior_cov - &out.post_cov), 1e-8));
    }

    #[test]
    fn repeated_deliveries_survive_rank_deficient_innovations() {
        let (m, s) = setup();
        let ss: Vec<_> = s.iter().map(|x| dare_steady_state(&m, x).unwrap()).collect();
        let gains: Vec<_> = ss.iter().map(|f| f.gain.clone()).collect();
        let priors: Vec<_> = ss.iter().map(|f| f.prior_cov.clone()).collect();
        let mut st = OptimalRemoteState::independent(Vector::zeros(2), Matrix::identity(2, 2) * 4.0, &priors).unwrap();
        let xs = Vector::from_vec(alloc::vec![0.5, -1.0]);
        for sensor in [0, 0, 1, 1, 0] {
            let out = optimal_step(&st, Action::Transmit(sensor), true, Some(&xs), &gains, &m, &s).unwrap();
            assert!(linalg::is_psd(&out.post_cov, 1e-9));
            assert!(linalg::is_psd(&(&st.prior_cov - &out.post_cov), 1e-8));
            st = out;
        }
    }

    #[test]
    fn received_estimate_must_match_outcome() {
        let (m, s) = setup();
        let st = OptimalRemoteState::independent(
            Vector::zeros(2),
            Matrix::identity(2, 2),
            &[Matrix::identity(2, 2), Matrix::identity(2, 2)],
        )
        .unwrap();
        let gains = [Matrix::zeros(2, 1), Matrix::zeros(2, 1)];
        assert!(optimal_step(&st, Action::Transmit(0), true, None, &gains, &m, &s).is_err());
        assert!(optimal_step(&st, Action::Transmit(5), false, None, &gains, &m, &s).is_err());
    }
}
