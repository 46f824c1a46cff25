//! Finite-horizon scheduling when raw measurements are sent: the state is
//! the remote prior covariance and each reception applies `g_m`.

use alloc::vec;
use alloc::vec::Vec;

use super::mdp::TIE_TOLERANCE;
use super::{check_beta, Action};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{check_detectability, f_map, g_map, stacked_c, SensorModel, SystemModel};

/// Largest covariance tree the solver will build.
pub const MEAS_NODE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasNode {
    /// 1-based decision stage.
    pub stage: usize,
    /// `P_{k|k-1}` at this node.
    pub cov: Matrix,
    pub action: Action,
    /// `J_stage(cov)`.
    pub value: f64,
    /// Child reached through `f`, then through `g_1, ..., g_M`; empty at the
    /// last stage.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasTree {
    pub horizon: usize,
    /// Breadth-first; node 0 is the root.
    pub nodes: Vec<MeasNode>,
}

impl MeasTree {
    pub fn root(&self) -> &MeasNode {
        &self.nodes[0]
    }

    pub fn cost(&self) -> f64 {
        self.root().value
    }
}

/// A change of the one-step optimal action as the scalar covariance grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBoundary {
    pub at: f64,
    pub from: Action,
    pub to: Action,
}

/// `tr[A P C^T (C P C^T + R)^{-1} C P A^T] = tr(f(P) - g(P))`, the one-step
/// covariance reduction of a received measurement.
pub fn meas_gain_trace(model: &SystemModel, sensor: &SensorModel, p: &Matrix) -> Result<f64> {
    model.check_sensor(sensor)?;
    linalg::check_square("P", p, model.dim())?;
    let c = sensor.c();
    let s = c * p * c.transpose() + sensor.r();
    let cpa = c * p * model.a().transpose();
    let x = s
        .lu()
        .solve(&cpa)
        .ok_or_else(|| Error::invalid("R", "innovation covariance is singular"))?;
    Ok((cpa.transpose() * x).trace())
}

fn node_count(sensors: usize, horizon: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..horizon {
        total = total.saturating_add(level);
        level = level.saturating_mul(sensors as u128 + 1);
    }
    total
}

/// Exact DP over the reachable tree `{f, g_1, ..., g_M}` rooted at `p0`.
pub fn solve_finite_meas(
    model: &SystemModel,
    sensors: &[SensorModel],
    beta: f64,
    horizon: usize,
    p0: &Matrix,
) -> Result<MeasTree> {
    check_beta(beta)?;
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if sensors.is_empty() {
        return Err(Error::invalid("sensors", "at least one sensor is required"));
    }
    for s in sensors {
        model.check_sensor(s)?;
    }
    linalg::check_square("P0", p0, model.dim())?;
    if !check_detectability(model, &stacked_c(sensors)) {
        return Err(Error::invalid("sensors", "stacked (A, C) is not detectable"));
    }
    let required = node_count(sensors.len(), horizon);
    if required > MEAS_NODE_LIMIT {
        return Err(Error::SizeGuard {
            required,
            limit: MEAS_NODE_LIMIT,
        });
    }

    let mut nodes = vec![MeasNode {
        stage: 1,
        cov: p0.clone(),
        action: Action::Idle,
        value: 0.0,
        children: Vec::new(),
    }];
    let mut idx = 0;
    while idx < nodes.len() {
        if nodes[idx].stage < horizon {
            let stage = nodes[idx].stage + 1;
            let mut kids = vec![f_map(&nodes[idx].cov, model)?];
            for s in sensors {
                kids.push(g_map(&nodes[idx].cov, model, s)?);
            }
            let first = nodes.len();
            nodes[idx].children = (first..first + kids.len()).collect();
            nodes.extend(kids.into_iter().map(|cov| MeasNode {
                stage,
                cov,
                action: Action::Idle,
                value: 0.0,
                children: Vec::new(),
            }));
        }
        idx += 1;
    }

    for i in (0..nodes.len()).rev() {
        let cov = &nodes[i].cov;
        let fx = f_map(cov, model)?;
        let tf = fx.trace();
        let cont = |c: usize| nodes[i].children.get(c).map_or(0.0, |&j| nodes[j].value);
        let mut best = (Action::Idle, beta * tf + cont(0));
        for (m, s) in sensors.iter().enumerate() {
            let lam = s.effective_lambda();
            let tg = g_map(cov, model, s)?.trace();
            let q = beta * (lam * tg + (1.0 - lam) * tf)
                + (1.0 - beta) * s.energy_cost()
                + lam * cont(m + 1)
                + (1.0 - lam) * cont(0);
            if q < best.1 - TIE_TOLERANCE * best.1.abs().max(1.0) {
                best = (Action::Transmit(m), q);
            }
        }
        nodes[i].action = best.0;
        nodes[i].value = best.1;
    }
    Ok(MeasTree { horizon, nodes })
}

/// One-step optimal action for a scalar system at covariance `p`.
fn scalar_action(model: &SystemModel, sensors: &[SensorModel], beta: f64, p: f64) -> Result<Action> {
    Ok(solve_finite_meas(model, sensors, beta, 1, &linalg::scalar(p))?.root().action)
}

/// Where the one-step optimal action changes on `[lo, hi]` for a scalar
/// system: a uniform scan of `grid` points, then bisection on each change
/// down to `1e-12`.
pub fn action_boundaries(
    model: &SystemModel,
    sensors: &[SensorModel],
    beta: f64,
    lo: f64,
    hi: f64,
    grid: usize,
) -> Result<Vec<ActionBoundary>> {
    if model.dim() != 1 {
        return Err(Error::invalid("model", "boundary scan needs a scalar system"));
    }
    if !(lo >= 0.0 && hi > lo) || grid < 2 {
        return Err(Error::invalid("range", "need 0 <= lo < hi and at least two grid points"));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let mut out = Vec::new();
    let mut prev_p = lo;
    let mut prev = scalar_action(model, sensors, beta, lo)?;
    for i in 1..grid {
        let p = lo + step * i as f64;
        let a = scalar_action(model, sensors, beta, p)?;
        if a != prev {
            let (mut l, mut r) = (prev_p, p);
            while r - l > 1e-12 {
                let mid = 0.5 * (l + r);
                if scalar_action(model, sensors, beta, mid)? == prev {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            out.push(ActionBoundary {
                at: 0.5 * (l + r),
                from: prev,
                to: a,
            });
        }
        prev = a;
        prev_p = p;
    }
    Ok(out)
}
