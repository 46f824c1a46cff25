use alloc::vec::Vec;

use super::mdp::{relative_value_iteration, stationary_distribution, RviOptions};
use super::{iid_mdp, Action, ValueFunction};
use crate::error::{Error, Result};
use crate::model::{stability_bound, SensorModel, SystemModel};
use crate::statespace::StateSpace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationaryPolicy {
    pub actions: Vec<Action>,
}

impl StationaryPolicy {
    pub fn action(&self, state: usize) -> Action {
        self.actions[state]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteSolution {
    pub policy: StationaryPolicy,
    /// Relative values `h` (zero at `P̄_1`) and average cost `rho`.
    pub value: ValueFunction,
    pub iterations: usize,
    pub bellman_residual: f64,
    pub rho_history: Vec<f64>,
    /// Long-run distribution over states under the policy, from `P̄_1`.
    pub stationary: Vec<f64>,
    /// Stationary mass on the top state of each sensor chain.
    pub boundary_mass: f64,
}

impl InfiniteSolution {
    pub fn avg_cost(&self) -> f64 {
        self.value.avg_cost.unwrap_or(f64::NAN)
    }
}

/// An average-cost solution exists when `A` is stable or some link beats
/// the stability bound.
pub fn check_stability(model: &SystemModel, sensors: &[SensorModel]) -> Result<()> {
    if model.is_stable() {
        return Ok(());
    }
    let bound = stability_bound(model);
    let best = sensors
        .iter()
        .map(SensorModel::effective_lambda)
        .fold(0.0, f64::max);
    if best > bound {
        Ok(())
    } else {
        Err(Error::StabilityPrecondition {
            lambda: best,
            bound,
        })
    }
}

/// Relative value iteration on the truncated space, referenced at `P̄_1`.
pub fn solve_infinite_horizon(
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    opts: &RviOptions,
) -> Result<InfiniteSolution> {
    check_stability(space.model(), sensors)?;
    let mdp = iid_mdp(space, sensors, beta)?;
    let reference = space.root(0);
    let out = relative_value_iteration(&mdp, reference, opts)?;
    let actions = out
        .policy
        .iter()
        .enumerate()
        .map(|(i, &c)| mdp.action(i, c))
        .collect();
    let stationary = stationary_distribution(&mdp, &out.policy, reference);
    let boundary_mass = (0..space.len())
        .filter(|&i| space.is_top(i))
        .map(|i| stationary[i])
        .sum();
    Ok(InfiniteSolution {
        policy: StationaryPolicy { actions },
        value: ValueFunction {
            values: out.h,
            avg_cost: Some(out.rho),
        },
        iterations: out.iterations,
        bellman_residual: out.bellman_residual,
        rho_history: out.rho_history,
        stationary,
        boundary_mass,
    })
}
