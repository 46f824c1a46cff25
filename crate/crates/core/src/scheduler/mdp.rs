//! Finite Markov decision processes: backward induction, relative value
//! iteration and stationary distributions of the induced chains.

use alloc::vec;
use alloc::vec::Vec;

use super::Action;
use crate::error::{Error, Result};

/// Relative slack under which two action values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: Action,
    pub cost: f64,
    /// `(next state, probability)`.
    pub transitions: Vec<(usize, f64)>,
}

/// Per-state admissible choices, listed in tie-break order.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub choices: Vec<Vec<Choice>>,
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    fn q_value(&self, state: usize, choice: usize, v: &[f64]) -> f64 {
        let c = &self.choices[state][choice];
        c.cost + c.transitions.iter().map(|&(j, p)| p * v[j]).sum::<f64>()
    }

    /// Minimizing choice index and value; earlier choices win ties.
    pub fn greedy(&self, state: usize, v: &[f64]) -> (usize, f64) {
        let mut best = (0, self.q_value(state, 0, v));
        for c in 1..self.choices[state].len() {
            let q = self.q_value(state, c, v);
            if q < best.1 - TIE_TOLERANCE * best.1.abs().max(1.0) {
                best = (c, q);
            }
        }
        best
    }

    /// One application of the Bellman operator, with greedy choices.
    pub fn bellman(&self, v: &[f64]) -> (Vec<usize>, Vec<f64>) {
        (0..self.len()).map(|i| self.greedy(i, v)).unzip()
    }

    pub fn action(&self, state: usize, choice: usize) -> Action {
        self.choices[state][choice].action
    }

    /// Expected cost and next-state distribution under fixed choices.
    pub fn step_distribution(&self, dist: &[f64], policy: &[usize]) -> (f64, Vec<f64>) {
        let mut next = vec![0.0; self.len()];
        let mut cost = 0.0;
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let c = &self.choices[i][policy[i]];
            cost += mass * c.cost;
            for &(j, p) in &c.transitions {
                next[j] += mass * p;
            }
        }
        (cost, next)
    }
}

/// Backward induction over `horizon` stages with zero terminal cost.
/// Returns per-stage choices and values, stage 1 first.
pub fn backward_induction(mdp: &Mdp, horizon: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; mdp.len()];
    let mut policies = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (p, next) = mdp.bellman(&v);
        policies.push(p);
        values.push(next.clone());
        v = next;
    }
    policies.reverse();
    values.reverse();
    (policies, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RviOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Mixing weight `tau` of the aperiodicity transform
    /// `P -> (1 - tau) I + tau P`; `None` runs plain iteration.
    pub aperiodicity: Option<f64>,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            max_iterations: 100_000,
            aperiodicity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RviOutcome {
    pub h: Vec<f64>,
    pub rho: f64,
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// `max |T h - rho - h|` for the untransformed operator.
    pub bellman_residual: f64,
    /// `rho` estimates over the last iterations, oldest first.
    pub rho_history: Vec<f64>,
}

const RHO_HISTORY: usize = 10;

/// Relative value iteration normalised at `reference`.
pub fn relative_value_iteration(mdp: &Mdp, reference: usize, opts: &RviOptions) -> Result<RviOutcome> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    if let Some(tau) = opts.aperiodicity {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid("aperiodicity", "must lie in (0, 1]"));
        }
    }
    let tau = opts.aperiodicity.unwrap_or(1.0);
    let mut h = vec![0.0; mdp.len()];
    let mut residuals = Vec::new();
    let mut rho_history = Vec::new();
    for it in 1..=opts.max_iterations {
        let (_, tv) = mdp.bellman(&h);
        let v: Vec<f64> = tv
            .iter()
            .zip(&h)
            .map(|(t, old)| (1.0 - tau) * old + tau * t)
            .collect();
        let rho = v[reference];
        let next: Vec<f64> = v.iter().map(|x| x - rho).collect();
        let delta = next
            .iter()
            .zip(&h)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        if !delta.is_finite() {
            return Err(Error::NotConverged {
                iterations: it,
                residual: delta,
                residual_history: residuals,
            });
        }
        h = next;
        rho_history.push(rho / tau);
        if rho_history.len() > RHO_HISTORY {
            rho_history.remove(0);
        }
        residuals.push(delta);
        if residuals.len() > 16 {
            residuals.remove(0);
        }
        if delta < opts.epsilon {
            let (policy, th) = mdp.bellman(&h);
            let rho = th[reference] - h[reference];
            let bellman_residual = th
                .iter()
                .zip(&h)
                .fold(0.0f64, |acc, (t, x)| acc.max((t - rho - x).abs()));
            return Ok(RviOutcome {
                h,
                rho,
                policy,
                iterations: it,
                bellman_residual,
                rho_history,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        residual_history: residuals,
    })
}

/// Long-run state distribution of the chain induced by `policy`, started
/// from `start`. The lazy chain `(I + P) / 2` is iterated, which has the same
/// stationary laws and cannot oscillate.
pub fn stationary_distribution(mdp: &Mdp, policy: &[usize], start: usize) -> Vec<f64> {
    const TOL: f64 = 1e-13;
    const MAX_ITERATIONS: usize = 1_000_000;
    let mut dist = vec![0.0; mdp.len()];
    dist[start] = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let (_, moved) = mdp.step_distribution(&dist, policy);
        let next: Vec<f64> = dist.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
        let change: f64 = next.iter().zip(&dist).map(|(a, b)| (a - b).abs()).sum();
        dist = next;
        if change < TOL {
            break;
        }
    }
    dist
}
