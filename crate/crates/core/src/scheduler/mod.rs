//! Transmission scheduling: dynamic programming, relative value iteration,
//! brute-force oracles and structural checks.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::model::SensorModel;
use crate::statespace::StateSpace;
use mdp::{Choice, Mdp};

/// Scheduling decision for one time step: nobody transmits, or exactly one
/// sensor (0-based index) does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Idle,
    Transmit(usize),
}

impl Action {
    /// Integer code used in artifacts: 0 for idle, `m + 1` for sensor `m`.
    pub fn code(self) -> usize {
        match self {
            Action::Idle => 0,
            Action::Transmit(m) => m + 1,
        }
    }

    pub fn from_code(code: usize) -> Self {
        match code {
            0 => Action::Idle,
            m => Action::Transmit(m - 1),
        }
    }

    pub fn sensor(self) -> Option<usize> {
        match self {
            Action::Idle => None,
            Action::Transmit(m) => Some(m),
        }
    }

    /// All actions for `sensors` sensors in tie-break order.
    pub fn all(sensors: usize) -> impl Iterator<Item = Action> {
        core::iter::once(Action::Idle).chain((0..sensors).map(Action::Transmit))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Idle => write!(f, "e0"),
            Action::Transmit(m) => write!(f, "e{}", m + 1),
        }
    }
}

mod finite;
mod infinite;
mod markov;
mod meas;
pub mod mdp;
mod oracle;
mod structure;
mod thresholds;

pub use finite::{solve_finite_horizon, FinitePolicy, FiniteSolution};
pub use infinite::{
    check_stability, solve_infinite_horizon, InfiniteSolution, StationaryPolicy,
};
pub use markov::{solve_markov_drops, MarkovHorizon, MarkovSolution};
pub use mdp::RviOptions;
pub use meas::{
    action_boundaries, meas_gain_trace, solve_finite_meas, ActionBoundary, MeasNode, MeasTree,
    MEAS_NODE_LIMIT,
};
pub use oracle::{brute_force_policy_oracle, OracleResult, ORACLE_EVALUATION_LIMIT};
pub use structure::{
    truncated_order, verify_finite_structure, verify_structure, verify_structure_with, StructureOptions,
    StructureReport, Violation,
};
pub use thresholds::{extract_thresholds, Band, Scenario, ThresholdShape};

/// A value over the state space, plus the average cost for average-cost
/// problems.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub avg_cost: Option<f64>,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie strictly between 0 and 1"));
    }
    Ok(())
}

pub(crate) fn check_sensors(space: &StateSpace, sensors: &[SensorModel]) -> Result<()> {
    if sensors.len() != space.sensors() {
        return Err(Error::DimensionMismatch {
            context: "sensors",
            expected: (space.sensors(), 1),
            found: (sensors.len(), 1),
        });
    }
    Ok(())
}

/// Expected stage cost of `action` at state `index` when a scheduled
/// transmission gets through with probability `success`.
pub fn stage_cost_with(
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    index: usize,
    action: Action,
    success: f64,
) -> f64 {
    let predicted = space.predicted_trace(index);
    match action {
        Action::Idle => beta * predicted,
        Action::Transmit(m) => {
            beta * (success * space.post_trace(m) + (1.0 - success) * predicted)
                + (1.0 - beta) * sensors[m].energy_cost()
        }
    }
}

/// Expected stage cost under i.i.d. drops.
pub fn stage_cost(
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    index: usize,
    action: Action,
) -> f64 {
    let success = action.sensor().map_or(0.0, |m| sensors[m].effective_lambda());
    stage_cost_with(space, sensors, beta, index, action, success)
}

pub(crate) fn iid_mdp(space: &StateSpace, sensors: &[SensorModel], beta: f64) -> Result<Mdp> {
    check_beta(beta)?;
    check_sensors(space, sensors)?;
    let choices = (0..space.len())
        .map(|i| {
            Action::all(space.sensors())
                .map(|action| {
                    let fail = space.transition(i, action, false).next;
                    let transitions = match action {
                        Action::Idle => alloc::vec![(fail, 1.0)],
                        Action::Transmit(m) => {
                            let lam = sensors[m].effective_lambda();
                            let hit = space.transition(i, action, true).next;
                            alloc::vec![(hit, lam), (fail, 1.0 - lam)]
                        }
                    };
                    Choice {
                        action,
                        cost: stage_cost(space, sensors, beta, i, action),
                        transitions,
                    }
                })
                .collect()
        })
        .collect();
    Ok(Mdp { choices })
}
