use alloc::vec::Vec;

use super::mdp::backward_induction;
use super::{iid_mdp, Action, ValueFunction};
use crate::error::{Error, Result};
use crate::model::SensorModel;
use crate::statespace::StateSpace;

/// Time-varying decision table, `actions[k - 1][state]` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePolicy {
    pub horizon: usize,
    pub actions: Vec<Vec<Action>>,
}

impl FinitePolicy {
    /// Decision at stage `k` (1-based).
    pub fn action(&self, k: usize, state: usize) -> Action {
        self.actions[k - 1][state]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSolution {
    pub policy: FinitePolicy,
    /// `J_1, ..., J_K`; `J_{K+1}` is identically zero.
    pub values: Vec<ValueFunction>,
}

impl FiniteSolution {
    /// Optimal total cost from `state` at stage 1.
    pub fn cost_from(&self, state: usize) -> f64 {
        self.values[0].values[state]
    }

    /// `J_k` for `k = 1..=K`.
    pub fn value(&self, k: usize) -> Option<&[f64]> {
        self.values.get(k - 1).map(|v| v.values.as_slice())
    }
}

/// Backward induction on the steady-state space.
pub fn solve_finite_horizon(
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    horizon: usize,
) -> Result<FiniteSolution> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let mdp = iid_mdp(space, sensors, beta)?;
    let (choices, values) = backward_induction(&mdp, horizon);
    let actions = choices
        .iter()
        .map(|stage| {
            stage
                .iter()
                .enumerate()
                .map(|(i, &c)| mdp.action(i, c))
                .collect()
        })
        .collect();
    Ok(FiniteSolution {
        policy: FinitePolicy { horizon, actions },
        values: values
            .into_iter()
            .map(|values| ValueFunction {
                values,
                avg_cost: None,
            })
            .collect(),
    })
}
