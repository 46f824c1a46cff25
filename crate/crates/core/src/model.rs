//! Plant, sensor and channel descriptions, and the covariance maps built on them.

use alloc::format;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const LYAPUNOV_TOLERANCE: f64 = 1e-12;
const LYAPUNOV_MAX_ITERATIONS: usize = 1_000_000;
const PBH_RANK_TOLERANCE: f64 = 1e-8;

/// Linear time-invariant plant `x_{k+1} = A x_k + w_k`, `w_k ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Matrix,
    q: Matrix,
}

impl SystemModel {
    pub fn new(a: Matrix, q: Matrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::invalid("A", "state dimension must be positive"));
        }
        linalg::check_square("A", &a, n)?;
        linalg::check_square("Q", &q, n)?;
        if !a.iter().chain(q.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("A/Q", "entries must be finite"));
        }
        if !linalg::is_symmetric(&q, SYMMETRY_TOLERANCE) {
            return Err(Error::invalid("Q", "must be symmetric"));
        }
        if linalg::min_eigenvalue(&q) < -SYMMETRY_TOLERANCE {
            return Err(Error::invalid("Q", "must be positive semidefinite"));
        }
        Ok(Self {
            q: linalg::symmetrize(&q),
            a,
        })
    }

    pub fn scalar(a: f64, q: f64) -> Result<Self> {
        Self::new(linalg::scalar(a), linalg::scalar(q))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Rejects a sensor whose `C` does not match the state dimension.
    pub fn check_sensor(&self, sensor: &SensorModel) -> Result<()> {
        if sensor.c.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "C",
                expected: (sensor.c.nrows(), self.dim()),
                found: sensor.c.shape(),
            });
        }
        Ok(())
    }
}

/// One sensor `y_m = C_m x + v_m`, `v_m ~ N(0, R_m)`, transmitting over a
/// link that delivers with probability `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    c: Matrix,
    r: Matrix,
    lambda: f64,
    energy_cost: f64,
    feedback_lambda: f64,
}

impl SensorModel {
    pub fn new(c: Matrix, r: Matrix, lambda: f64, energy_cost: f64) -> Result<Self> {
        let p = c.nrows();
        if p == 0 || c.ncols() == 0 {
            return Err(Error::invalid("C", "must be non-empty"));
        }
        linalg::check_square("R", &r, p)?;
        if !c.iter().chain(r.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("C/R", "entries must be finite"));
        }
        if !linalg::is_symmetric(&r, SYMMETRY_TOLERANCE) {
            return Err(Error::invalid("R", "must be symmetric"));
        }
        if linalg::min_eigenvalue(&r) <= 0.0 {
            return Err(Error::invalid("R", "must be positive definite"));
        }
        check_probability("lambda", lambda)?;
        if !(energy_cost >= 0.0 && energy_cost.is_finite()) {
            return Err(Error::invalid("energy_cost", "must be finite and nonnegative"));
        }
        Ok(Self {
            c,
            r: linalg::symmetrize(&r),
            lambda,
            energy_cost,
            feedback_lambda: 1.0,
        })
    }

    pub fn scalar(c: f64, r: f64, lambda: f64, energy_cost: f64) -> Result<Self> {
        Self::new(linalg::scalar(c), linalg::scalar(r), lambda, energy_cost)
    }

    pub fn with_feedback_lambda(mut self, feedback_lambda: f64) -> Result<Self> {
        check_probability("feedback_lambda", feedback_lambda)?;
        self.feedback_lambda = feedback_lambda;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        check_probability("lambda", lambda)?;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_energy_cost(mut self, energy_cost: f64) -> Result<Self> {
        if !(energy_cost >= 0.0 && energy_cost.is_finite()) {
            return Err(Error::invalid("energy_cost", "must be finite and nonnegative"));
        }
        self.energy_cost = energy_cost;
        Ok(self)
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn energy_cost(&self) -> f64 {
        self.energy_cost
    }

    pub fn feedback_lambda(&self) -> f64 {
        self.feedback_lambda
    }

    /// Reception probability seen by the scheduler once feedback losses are
    /// folded into the forward link.
    pub fn effective_lambda(&self) -> f64 {
        self.lambda * self.feedback_lambda
    }

    pub fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(name, format!("{p} is not a probability")));
    }
    Ok(())
}

/// Packet-loss process on a sensor link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Independent drops, delivered with probability `lambda`.
    Iid { lambda: f64 },
    /// Two-state (Gilbert-Elliott) chain with failure rate
    /// `p = P(drop | previous delivered)` and recovery rate
    /// `q = P(delivered | previous dropped)`.
    Markov { p: f64, q: f64 },
}

impl ChannelModel {
    pub fn iid(lambda: f64) -> Result<Self> {
        check_probability("lambda", lambda)?;
        Ok(ChannelModel::Iid { lambda })
    }

    pub fn markov(p: f64, q: f64) -> Result<Self> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        Ok(ChannelModel::Markov { p, q })
    }

    /// `(p, q)` of the equivalent two-state chain.
    pub fn failure_recovery(&self) -> (f64, f64) {
        match *self {
            ChannelModel::Iid { lambda } => (1.0 - lambda, lambda),
            ChannelModel::Markov { p, q } => (p, q),
        }
    }

    /// Probability of delivery given the previous channel outcome.
    pub fn success_probability(&self, previous_success: bool) -> f64 {
        let (p, q) = self.failure_recovery();
        if previous_success {
            1.0 - p
        } else {
            q
        }
    }

    /// Row-stochastic matrix indexed `[previous][next]` with state 0 = drop,
    /// 1 = delivered.
    pub fn transition_matrix(&self) -> [[f64; 2]; 2] {
        let (p, q) = self.failure_recovery();
        [[1.0 - q, q], [p, 1.0 - p]]
    }

    /// Long-run delivery fraction, when the chain has a unique stationary law.
    pub fn stationary_success(&self) -> Option<f64> {
        let (p, q) = self.failure_recovery();
        if p + q == 0.0 {
            None
        } else {
            Some(q / (p + q))
        }
    }
}

/// `f(X) = A X A^T + Q`: one prediction step without a measurement.
pub fn f_map(p: &Matrix, model: &SystemModel) -> Result<Matrix> {
    linalg::check_square("P", p, model.dim())?;
    let a = model.a();
    Ok(linalg::symmetrize(&(a * p * a.transpose() + model.q())))
}

/// `g_m(X) = A X A^T - A X C^T (C X C^T + R)^{-1} C X A^T + Q`: measurement
/// update with sensor `m` followed by prediction.
pub fn g_map(p: &Matrix, model: &SystemModel, sensor: &SensorModel) -> Result<Matrix> {
    linalg::check_square("P", p, model.dim())?;
    model.check_sensor(sensor)?;
    let a = model.a();
    let c = sensor.c();
    let innovation = c * p * c.transpose() + sensor.r();
    let apc = a * p * c.transpose();
    let gain = linalg::solve_right(&apc, &innovation)
        .ok_or_else(|| Error::invalid("P", "innovation covariance is singular"))?;
    let out = a * p * a.transpose() - gain * apc.transpose() + model.q();
    Ok(linalg::symmetrize(&out))
}

/// Smallest reception probability (exclusive) for which the expected
/// covariance stays bounded: `1 - 1/rho(A)^2` for unstable `A`, else 0.
pub fn stability_bound(model: &SystemModel) -> f64 {
    let rho = model.spectral_radius();
    if rho > 1.0 {
        1.0 - 1.0 / (rho * rho)
    } else {
        0.0
    }
}

/// Solves the discrete Lyapunov equation `P = F P F^T + V` by fixed-point
/// iteration.
pub fn lyapunov_solve(f: &Matrix, v: &Matrix) -> Result<Matrix> {
    let n = f.nrows();
    linalg::check_square("F", f, n)?;
    linalg::check_square("V", v, n)?;
    let rho = linalg::spectral_radius(f);
    if rho >= 1.0 {
        return Err(Error::Unstable {
            spectral_radius: rho,
        });
    }
    let ft = f.transpose();
    let mut p = v.clone();
    let mut last_delta = f64::INFINITY;
    for _ in 0..LYAPUNOV_MAX_ITERATIONS {
        let next = f * &p * &ft + v;
        last_delta = linalg::max_abs(&(&next - &p));
        p = next;
        if last_delta < LYAPUNOV_TOLERANCE {
            return Ok(linalg::symmetrize(&p));
        }
    }
    Err(Error::NotConverged {
        iterations: LYAPUNOV_MAX_ITERATIONS,
        residual: last_delta,
        residual_history: alloc::vec![last_delta],
    })
}

/// PBH test: every eigenvalue of `A` on or outside the unit circle must be
/// observable through `C`.
pub fn check_detectability(model: &SystemModel, c: &Matrix) -> bool {
    let n = model.dim();
    if c.ncols() != n {
        return false;
    }
    let a = model.a();
    linalg::eigenvalues(a)
        .into_iter()
        .filter(|&sigma| linalg::modulus(sigma) >= 1.0 - 1e-10)
        .all(|sigma| {
            let rows = n + c.nrows();
            let pbh = nalgebra::DMatrix::<Complex<f64>>::from_fn(rows, n, |i, j| {
                if i < n {
                    let diag = if i == j { sigma } else { Complex::new(0.0, 0.0) };
                    diag - Complex::new(a[(i, j)], 0.0)
                } else {
                    Complex::new(c[(i - n, j)], 0.0)
                }
            });
            linalg::complex_rank(&pbh, PBH_RANK_TOLERANCE) == n
        })
}

/// Stacks the measurement matrices of several sensors on top of each other.
pub fn stacked_c(sensors: &[SensorModel]) -> Matrix {
    let cols = sensors.first().map_or(0, |s| s.c().ncols());
    let rows: usize = sensors.iter().map(|s| s.c().nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r0 = 0;
    for s in sensors {
        let h = s.c().nrows();
        out.view_mut((r0, 0), (h, cols)).copy_from(s.c());
        r0 += h;
    }
    out
}

/// Folds an unreliable scheduling-feedback link into the forward link: a lost
/// command is indistinguishable from a dropped packet.
pub fn fold_feedback(sensor: &SensorModel) -> SensorModel {
    SensorModel {
        lambda: sensor.lambda * sensor.feedback_lambda,
        feedback_lambda: 1.0,
        ..sensor.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat, scalar};

    fn vector_plant() -> SystemModel {
        SystemModel::new(mat(&[&[1.1, 0.2], &[0.2, 0.8]]), Matrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn f_map_of_zero_is_q() {
        let m = vector_plant();
        assert_eq!(f_map(&Matrix::zeros(2, 2), &m).unwrap(), *m.q());
    }

    #[test]
    fn scalar_f_and_g() {
        let m = SystemModel::scalar(1.1, 0.1).unwrap();
        let s = SensorModel::scalar(1.0, 1.0, 0.8, 1.0).unwrap();
        assert!((f_map(&scalar(1.0), &m).unwrap()[(0, 0)] - 1.31).abs() < 1e-12);
        assert!((g_map(&scalar(1.0), &m, &s).unwrap()[(0, 0)] - 0.705).abs() < 1e-12);
    }

    #[test]
    fn g_map_approaches_f_map_without_information() {
        let m = vector_plant();
        let s = SensorModel::new(mat(&[&[1.0, 1.0]]), scalar(1e12), 1.0, 0.0).unwrap();
        let p = Matrix::identity(2, 2);
        let diff = f_map(&p, &m).unwrap() - g_map(&p, &m, &s).unwrap();
        assert!(linalg::max_abs(&diff) < 1e-6);
    }

    #[test]
    fn f_map_rejects_wrong_dimension() {
        let m = vector_plant();
        assert!(matches!(
            f_map(&Matrix::zeros(3, 3), &m),
            Err(Error::DimensionMismatch { .. })
        ));
        let s = SensorModel::scalar(1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(g_map(&Matrix::identity(2, 2), &m, &s).is_err());
    }

    #[test]
    fn stability_bounds() {
        assert!((stability_bound(&vector_plant()) - (1.0 - 1.0 / 1.44)).abs() < 1e-10);
        let stable = SystemModel::new(Matrix::identity(2, 2) * 0.5, Matrix::identity(2, 2)).unwrap();
        assert_eq!(stability_bound(&stable), 0.0);
        let s = SystemModel::scalar(1.1, 1.0).unwrap();
        assert!((stability_bound(&s) - (1.0 - 1.0 / 1.21)).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let v = mat(&[&[2.0, 0.5], &[0.5, 1.0]]);
        assert_eq!(lyapunov_solve(&Matrix::zeros(2, 2), &v).unwrap(), v);
        let p = lyapunov_solve(&scalar(0.5), &scalar(1.0)).unwrap();
        assert!((p[(0, 0)] - 4.0 / 3.0).abs() < 1e-11);
        assert!(matches!(
            lyapunov_solve(&scalar(1.0), &scalar(1.0)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn detectability() {
        let m = vector_plant();
        assert!(check_detectability(&m, &mat(&[&[1.0, 1.0]])));
        let s = SystemModel::scalar(2.0, 1.0).unwrap();
        assert!(!check_detectability(&s, &scalar(0.0)));
        // stable plants are always detectable
        let stable = SystemModel::scalar(0.5, 1.0).unwrap();
        assert!(check_detectability(&stable, &scalar(0.0)));
    }

    #[test]
    fn detectability_sees_hidden_unstable_mode() {
        // mode 2 (eigenvalue 1.5) is invisible through C = [1, 0]
        let m = SystemModel::new(mat(&[&[0.5, 0.0], &[0.0, 1.5]]), Matrix::identity(2, 2)).unwrap();
        assert!(!check_detectability(&m, &mat(&[&[1.0, 0.0]])));
        assert!(check_detectability(&m, &mat(&[&[0.0, 1.0]])));
    }

    #[test]
    fn feedback_folding() {
        let s = SensorModel::scalar(1.0, 1.0, 0.8, 1.0).unwrap();
        assert_eq!(fold_feedback(&s).lambda(), 0.8);
        let s = s.with_feedback_lambda(0.9).unwrap();
        let folded = fold_feedback(&s);
        assert!((folded.lambda() - 0.72).abs() < 1e-15);
        assert_eq!(folded.feedback_lambda(), 1.0);
        assert_eq!(folded.c(), s.c());
        let zero = SensorModel::scalar(1.0, 1.0, 0.0, 1.0)
            .unwrap()
            .with_feedback_lambda(0.3)
            .unwrap();
        assert_eq!(fold_feedback(&zero).lambda(), 0.0);
    }

    #[test]
    fn iid_channel_is_a_markov_channel() {
        let iid = ChannelModel::iid(0.7).unwrap();
        let markov = ChannelModel::markov(0.3, 0.7).unwrap();
        let (a, b) = (iid.transition_matrix(), markov.transition_matrix());
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(ChannelModel::markov(0.0, 0.0).unwrap().stationary_success(), None);
    }

    #[test]
    fn construction_validates_inputs() {
        assert!(SystemModel::new(Matrix::identity(2, 2), mat(&[&[1.0, 0.5], &[0.0, 1.0]])).is_err());
        assert!(SystemModel::new(Matrix::identity(2, 2), -Matrix::identity(2, 2)).is_err());
        assert!(SensorModel::scalar(1.0, 0.0, 0.5, 1.0).is_err());
        assert!(SensorModel::scalar(1.0, 1.0, 1.5, 1.0).is_err());
        assert!(SensorModel::scalar(1.0, 1.0, 0.5, -1.0).is_err());
        assert!(ChannelModel::markov(-0.1, 0.5).is_err());
    }
}
