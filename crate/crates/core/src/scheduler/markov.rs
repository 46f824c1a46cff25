//! Single-sensor scheduling under Gilbert-Elliott drops. The decision state
//! is `(P, gamma_prev)`, indexed as `gamma_prev * len + state`.

use alloc::vec;
use alloc::vec::Vec;

use super::mdp::{backward_induction, relative_value_iteration, stationary_distribution, Choice, Mdp, RviOptions};
use super::{check_beta, stage_cost_with, Action};
use crate::error::{Error, Result};
use crate::model::{stability_bound, ChannelModel, SensorModel};
use crate::statespace::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkovHorizon {
    Finite(usize),
    Infinite(RviOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSolution {
    /// `policies[k][g][state]`: stage `k + 1` (a single stage for the
    /// average-cost problem) with previous channel state `g`.
    pub policies: Vec<[Vec<Action>; 2]>,
    /// `J_k` per stage, or the relative values `h`.
    pub values: Vec<[Vec<f64>; 2]>,
    pub avg_cost: Option<f64>,
    pub bellman_residual: Option<f64>,
    pub iterations: usize,
    /// Stationary mass on the truncation top, average-cost problem only.
    pub boundary_mass: Option<f64>,
    /// The average-cost existence check used `q / (p + q)` in place of an
    /// i.i.d. reception probability; no exact condition is known here.
    pub heuristic_stability_guard: bool,
}

impl MarkovSolution {
    pub fn slice(&self, stage: usize, gamma_prev: bool) -> &[Action] {
        &self.policies[stage][gamma_prev as usize]
    }

    /// Hop count where transmission starts in each `gamma_prev` slice, or
    /// `None` for a slice that is not of threshold form. A slice that never
    /// transmits reports the depth.
    pub fn thresholds(&self, stage: usize) -> [Option<usize>; 2] {
        let one = |acts: &[Action]| {
            let t = acts.iter().position(|a| *a != Action::Idle).unwrap_or(acts.len());
            acts[t..].iter().all(|a| *a != Action::Idle).then_some(t)
        };
        [one(&self.policies[stage][0]), one(&self.policies[stage][1])]
    }
}

fn markov_mdp(
    space: &StateSpace,
    sensor: &SensorModel,
    channel: &ChannelModel,
    beta: f64,
) -> Mdp {
    let n = space.len();
    let sensors = core::slice::from_ref(sensor);
    let mut choices = Vec::with_capacity(2 * n);
    for g in [false, true] {
        for i in 0..n {
            let fail = space.transition(i, Action::Idle, false).next;
            let succ = channel.success_probability(g) * sensor.feedback_lambda();
            let tx = Action::Transmit(0);
            choices.push(vec![
                Choice {
                    action: Action::Idle,
                    cost: stage_cost_with(space, sensors, beta, i, Action::Idle, 0.0),
                    transitions: vec![(fail, 1.0)],
                },
                Choice {
                    action: tx,
                    cost: stage_cost_with(space, sensors, beta, i, tx, succ),
                    transitions: vec![(n + space.root(0), succ), (fail, 1.0 - succ)],
                },
            ]);
        }
    }
    Mdp { choices }
}

fn split<T: Clone>(v: &[T], n: usize) -> [Vec<T>; 2] {
    [v[..n].to_vec(), v[n..].to_vec()]
}

/// Solves the product-space problem over `S^N x {0, 1}`. A scheduled packet
/// arrives with probability `gamma_prev (1 - p) + (1 - gamma_prev) q`; any
/// step without a reception leaves the channel state at 0.
pub fn solve_markov_drops(
    space: &StateSpace,
    sensor: &SensorModel,
    channel: &ChannelModel,
    beta: f64,
    horizon: MarkovHorizon,
) -> Result<MarkovSolution> {
    check_beta(beta)?;
    if space.sensors() != 1 {
        return Err(Error::invalid("sensors", "Markov drops are solved for one sensor"));
    }
    if let ChannelModel::Markov { p, q } = *channel {
        if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
            return Err(Error::invalid("channel", "p and q must lie strictly between 0 and 1"));
        }
    }
    let n = space.len();
    let mdp = markov_mdp(space, sensor, channel, beta);
    let to_actions = |stage: &[usize]| -> Vec<Action> {
        stage.iter().enumerate().map(|(i, &c)| mdp.action(i, c)).collect()
    };
    match horizon {
        MarkovHorizon::Finite(k) => {
            if k == 0 {
                return Err(Error::invalid("horizon", "must be at least 1"));
            }
            let (choices, values) = backward_induction(&mdp, k);
            Ok(MarkovSolution {
                policies: choices.iter().map(|c| split(&to_actions(c), n)).collect(),
                values: values.iter().map(|v| split(v, n)).collect(),
                avg_cost: None,
                bellman_residual: None,
                iterations: k,
                boundary_mass: None,
                heuristic_stability_guard: false,
            })
        }
        MarkovHorizon::Infinite(opts) => {
            let model = space.model();
            let heuristic = matches!(channel, ChannelModel::Markov { .. });
            if !model.is_stable() {
                let lam = channel.stationary_success().unwrap_or(0.0) * sensor.feedback_lambda();
                let bound = stability_bound(model);
                if lam <= bound {
                    return Err(Error::StabilityPrecondition { lambda: lam, bound });
                }
            }
            let reference = n + space.root(0);
            let out = relative_value_iteration(&mdp, reference, &opts)?;
            let pi = stationary_distribution(&mdp, &out.policy, reference);
            let boundary_mass = (0..2 * n).filter(|&i| space.is_top(i % n)).map(|i| pi[i]).sum();
            Ok(MarkovSolution {
                policies: vec![split(&to_actions(&out.policy), n)],
                values: vec![split(&out.h, n)],
                avg_cost: Some(out.rho),
                bellman_residual: Some(out.bellman_residual),
                iterations: out.iterations,
                boundary_mass: Some(boundary_mass),
                heuristic_stability_guard: heuristic,
            })
        }
    }
}
