use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::localfilter::{dare_steady_state, SteadyStateFilter};
use crate::model::{f_map, lyapunov_solve, stability_bound, SensorModel, SystemModel};
use crate::scheduler::Action;
use crate::statespace::StateTag;

/// Constant-gain remote estimator: the estimate is replaced by the received
/// local estimate on delivery and propagated open loop otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGainState {
    /// `x̃_{k|k}`.
    pub estimate: Vector,
    /// Position of `P̃_{k|k}` in the state space.
    pub tag: StateTag,
    /// `P̃_{k|k}` itself.
    pub cov: Matrix,
}

impl ConstantGainState {
    pub fn new(estimate: Vector, tag: StateTag, cov: Matrix) -> Self {
        Self { estimate, tag, cov }
    }
}

/// One step of the constant-gain estimator. `received` carries the local
/// updated estimate and covariance of the scheduled sensor when its packet
/// arrived.
pub fn suboptimal_step(
    state: &ConstantGainState,
    scheduled: Action,
    gamma: bool,
    received: Option<(&Vector, &Matrix)>,
    model: &SystemModel,
) -> Result<ConstantGainState> {
    let n = model.dim();
    linalg::check_len("estimate", &state.estimate, n)?;
    match (scheduled, gamma, received) {
        (Action::Transmit(m), true, Some((x, p))) => {
            linalg::check_len("received estimate", x, n)?;
            linalg::check_square("received covariance", p, n)?;
            Ok(ConstantGainState {
                estimate: x.clone(),
                tag: StateTag::new(m, 0),
                cov: p.clone(),
            })
        }
        (Action::Transmit(_), true, None) => Err(Error::invalid(
            "received",
            "a delivered packet must carry the local estimate",
        )),
        (_, _, Some(_)) => Err(Error::invalid(
            "received",
            "nothing can be received without a delivered transmission",
        )),
        _ => Ok(ConstantGainState {
            estimate: model.a() * &state.estimate,
            tag: StateTag::new(state.tag.sensor, state.tag.hops + 1),
            cov: f_map(&state.cov, model)?,
        }),
    }
}

/// Fixed point of the averaged constant-gain equations, with residuals of
/// each of the three equations evaluated at it.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointCertificate {
    pub p: Matrix,
    pub p0m: Matrix,
    pub k: Matrix,
    /// Max-entry residuals of the `P`, `P_{0m}` and gain equations.
    pub residuals: [f64; 3],
}

/// Residuals of the averaged equations for a candidate `(P, P_0m, K)`. The
/// gain equation is checked in the product form `K D - N`.
pub fn fixed_point_residuals(
    model: &SystemModel,
    sensor: &SensorModel,
    filter: &SteadyStateFilter,
    p: &Matrix,
    p0m: &Matrix,
    k: &Matrix,
) -> [f64; 3] {
    let a = model.a();
    let n = model.dim();
    let lam = sensor.lambda();
    let eye = Matrix::identity(n, n);
    let ks = &filter.gain;
    let l = &eye - ks * sensor.c();
    let ps = &filter.prior_cov;
    let krk = ks * sensor.r() * ks.transpose();
    let j = &eye - k;
    let at = a.transpose();

    let rhs_p = (a * &j * p * j.transpose() * &at) * lam
        + (a * p * &at) * (1.0 - lam)
        + (a * &j * p0m * l.transpose() * k.transpose() * &at) * lam
        + (a * k * &l * p0m.transpose() * j.transpose() * &at) * lam
        + (a * k * &l * ps * l.transpose() * k.transpose() * &at) * lam
        + (a * k * &krk * k.transpose() * &at) * lam
        + model.q();
    let rhs_p0 = a * (&eye - k * lam) * p0m * l.transpose() * &at
        + (a * k * &l * ps * l.transpose() * &at) * lam
        + model.q()
        + (a * k * &krk * &at) * lam;
    let num = p - p0m * l.transpose();
    let den = &num - &l * p0m.transpose() + &l * ps * l.transpose() + &krk;

    [
        linalg::max_abs(&(rhs_p - p)),
        linalg::max_abs(&(rhs_p0 - p0m)),
        linalg::max_abs(&(k * den - num)),
    ]
}

/// Builds the fixed point with `K = I`, `P_0m = P̄_m^s` and `P` from the
/// associated Lyapunov equation, and certifies it.
pub fn verify_constant_gain_fixed_point(
    model: &SystemModel,
    sensor: &SensorModel,
) -> Result<FixedPointCertificate> {
    let lam = sensor.lambda();
    let bound = stability_bound(model);
    if !model.is_stable() && lam <= bound {
        return Err(Error::StabilityPrecondition { lambda: lam, bound });
    }
    let filter = dare_steady_state(model, sensor)?;
    let a = model.a();
    let f = a * libm::sqrt(1.0 - lam);
    let v = model.q() + (a * &filter.post_cov * a.transpose()) * lam;
    let p = lyapunov_solve(&f, &v)?;
    let k = Matrix::identity(model.dim(), model.dim());
    let residuals = fixed_point_residuals(model, sensor, &filter, &p, &filter.prior_cov, &k);
    Ok(FixedPointCertificate {
        p,
        p0m: filter.prior_cov,
        k,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat, scalar};

    fn vector_case(lambda: f64) -> (SystemModel, SensorModel) {
        let m = SystemModel::new(mat(&[&[1.1, 0.2], &[0.2, 0.8]]), Matrix::identity(2, 2)).unwrap();
        let s = SensorModel::new(mat(&[&[1.0, 1.0]]), scalar(1.0), lambda, 1.0).unwrap();
        (m, s)
    }

    #[test]
    fn certificate_holds() {
        let (m, s) = vector_case(0.8);
        let cert = verify_constant_gain_fixed_point(&m, &s).unwrap();
        assert!(cert.residuals.iter().all(|&r| r < 1e-8), "{:?}", cert.residuals);
    }

    #[test]
    fn below_bound_is_rejected() {
        let (m, s) = vector_case(0.2);
        assert!(matches!(
            verify_constant_gain_fixed_point(&m, &s),
            Err(Error::StabilityPrecondition { .. })
        ));
    }

    #[test]
    fn non_identity_gain_leaves_residuals() {
        let (m, s) = vector_case(0.8);
        let cert = verify_constant_gain_fixed_point(&m, &s).unwrap();
        let f = dare_steady_state(&m, &s).unwrap();
        let r = fixed_point_residuals(&m, &s, &f, &cert.p, &cert.p0m, &(Matrix::identity(2, 2) * 0.5));
        assert!(r[0] > 1e-3 && r[2] > 1e-3);
        // the P_0m equation holds for any gain
        assert!(r[1] < 1e-8);
    }

    #[test]
    fn failure_then_success() {
        let m = SystemModel::scalar(1.1, 1.0).unwrap();
        let st = ConstantGainState::new(Vector::from_element(1, 2.0), StateTag::new(0, 2), scalar(3.0));
        let out = suboptimal_step(&st, Action::Idle, true, None, &m).unwrap();
        assert_eq!(out.tag, StateTag::new(0, 3));
        assert!((out.estimate[0] - 2.2).abs() < 1e-15);
        assert!((out.cov[(0, 0)] - (1.21 * 3.0 + 1.0)).abs() < 1e-12);
        let x = Vector::from_element(1, -1.0);
        let p = scalar(0.4);
        let out = suboptimal_step(&out, Action::Transmit(1), true, Some((&x, &p)), &m).unwrap();
        assert_eq!(out.tag, StateTag::new(1, 0));
        assert_eq!(out.estimate, x);
        let out = suboptimal_step(&out, Action::Transmit(0), false, None, &m).unwrap();
        assert_eq!(out.tag, StateTag::new(1, 1));
    }
}
