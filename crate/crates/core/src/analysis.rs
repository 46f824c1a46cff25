//! Closed-form performance of single-sensor threshold policies.
//!
//! Under a threshold at `f^t(P̄)` the covariance index evolves as a chain on
//! `0, 1, 2, ...`: it climbs deterministically up to `t`, then each step
//! returns to 0 with probability `lambda`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::localfilter::SteadyStateFilter;
use crate::model::{f_map, lyapunov_solve, stability_bound, SensorModel, SystemModel};
use crate::scheduler::{extract_thresholds, solve_infinite_horizon, RviOptions};
use crate::statespace::build_state_space;

/// Stationary law of the threshold chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChain {
    pub t: usize,
    pub lambda: f64,
    pub pi0: f64,
}

impl ThresholdChain {
    /// `pi_j`: `pi_0` up to `t`, then geometric decay by `1 - lambda`.
    pub fn pi(&self, j: usize) -> f64 {
        if j <= self.t {
            self.pi0
        } else {
            self.pi0 * libm::pow(1.0 - self.lambda, (j - self.t) as f64)
        }
    }

    pub fn probabilities(&self, len: usize) -> Vec<f64> {
        (0..len).map(|j| self.pi(j)).collect()
    }

    /// Mass on indices `>= from`, summed in closed form.
    pub fn tail_mass(&self, from: usize) -> f64 {
        if self.lambda == 1.0 {
            return if from <= self.t {
                (self.t + 1 - from) as f64 * self.pi0
            } else {
                0.0
            };
        }
        if from <= self.t {
            (self.t - from) as f64 * self.pi0 + self.pi0 / self.lambda
        } else {
            self.pi(from) / self.lambda
        }
    }

    /// Long-run fraction of steps with a transmission.
    pub fn transmit_fraction(&self) -> f64 {
        self.tail_mass(self.t)
    }
}

/// `pi_0 = lambda / (lambda t + 1)`.
pub fn stationary_distribution(t: usize, lambda: f64) -> Result<ThresholdChain> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("lambda", "must lie in (0, 1]"));
    }
    Ok(ThresholdChain {
        t,
        lambda,
        pi0: lambda / (lambda * t as f64 + 1.0),
    })
}

/// `E / (lambda t + 1)`.
pub fn expected_energy(t: usize, lambda: f64, energy: f64) -> Result<f64> {
    Ok(energy * stationary_distribution(t, lambda)?.transmit_fraction())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSeries {
    /// `sum_j pi_j tr f^j(P̄)`, tail included exactly.
    pub value: f64,
    /// First index `J` with remainder `sum_{j >= J} pi_j tr f^j(P̄)` below
    /// `tail_tol * value`.
    pub truncation_index: usize,
    /// That remainder.
    pub remainder: f64,
}

/// Tail `sum_{i >= 0} c^i f^i(X)` with `c = 1 - lambda`, as `Y + (c/lambda) Z`
/// where `Y = X + c A Y A^T` and `Z = Q + c A Z A^T`.
fn geometric_tail(x: &Matrix, lambda: f64, model: &SystemModel) -> Result<Matrix> {
    let c = 1.0 - lambda;
    if c == 0.0 {
        return Ok(x.clone());
    }
    let f = model.a() * libm::sqrt(c);
    let y = lyapunov_solve(&f, x)?;
    let z = lyapunov_solve(&f, model.q())?;
    Ok(y + z * (c / lambda))
}

/// Long-run average `tr P` under the threshold policy.
pub fn expected_covariance(
    t: usize,
    lambda: f64,
    model: &SystemModel,
    filter: &SteadyStateFilter,
    tail_tol: f64,
) -> Result<CovarianceSeries> {
    let bound = stability_bound(model);
    if lambda <= bound {
        return Err(Error::StabilityPrecondition { lambda, bound });
    }
    let chain = stationary_distribution(t, lambda)?;
    let mut x = filter.post_cov.clone();
    let mut head = Vec::with_capacity(t + 1);
    for _ in 0..t {
        head.push(x.trace());
        x = f_map(&x, model)?;
    }
    let value = chain.pi0 * (head.iter().sum::<f64>() + geometric_tail(&x, lambda, model)?.trace());

    // walk the series until the exact remainder is small
    let mut partial = 0.0;
    let mut y = filter.post_cov.clone();
    let mut j = 0;
    loop {
        let remainder = (value - partial).max(0.0);
        if remainder <= tail_tol * value || j >= 1_000_000 {
            return Ok(CovarianceSeries {
                value,
                truncation_index: j,
                remainder,
            });
        }
        partial += chain.pi(j) * y.trace();
        y = f_map(&y, model)?;
        j += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub beta: f64,
    /// Hop index of the optimal threshold; `None` when the truncated policy
    /// never transmits.
    pub threshold: Option<usize>,
    pub expected_energy: f64,
    pub expected_cov_trace: f64,
    pub avg_cost: f64,
}

/// Solves the average-cost problem at each `beta` and evaluates the closed
/// forms at the resulting threshold.
pub fn tradeoff_curve(
    model: &SystemModel,
    sensor: &SensorModel,
    betas: &[f64],
    depth: usize,
    opts: &RviOptions,
) -> Result<Vec<TradeoffPoint>> {
    let sensors = core::slice::from_ref(sensor);
    let space = build_state_space(model, sensors, depth)?;
    let filter = &space.filters()[0];
    let lambda = sensor.effective_lambda();
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        let sol = solve_infinite_horizon(&space, sensors, beta, opts)?;
        let shape = extract_thresholds(&sol.policy.actions, &space);
        let t = shape
            .first_transmit(space.len())
            .ok_or_else(|| Error::invalid("policy", "optimal policy is not of threshold form"))?;
        let point = if t < space.len() {
            TradeoffPoint {
                beta,
                threshold: Some(t),
                expected_energy: expected_energy(t, lambda, sensor.energy_cost())?,
                expected_cov_trace: expected_covariance(t, lambda, model, filter, 1e-8)?.value,
                avg_cost: sol.avg_cost(),
            }
        } else {
            let limit = lyapunov_solve(model.a(), model.q())?;
            TradeoffPoint {
                beta,
                threshold: None,
                expected_energy: 0.0,
                expected_cov_trace: limit.trace(),
                avg_cost: sol.avg_cost(),
            }
        };
        out.push(point);
    }
    Ok(out)
}
