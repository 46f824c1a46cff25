use alloc::vec;
use alloc::vec::Vec;

use super::{iid_mdp, Action, FinitePolicy};
use crate::error::{Error, Result};
use crate::model::SensorModel;
use crate::statespace::StateSpace;

/// Largest number of candidate policies the oracle will evaluate.
pub const ORACLE_EVALUATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub policy: FinitePolicy,
    pub cost: f64,
    pub evaluations: u64,
}

/// Exhaustive search over deterministic Markov policies on the states
/// reachable from `initial`, each evaluated exactly by propagating the state
/// distribution forward.
pub fn brute_force_policy_oracle(
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    horizon: usize,
    initial: usize,
) -> Result<OracleResult> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if initial >= space.len() {
        return Err(Error::invalid("initial", "state index out of range"));
    }
    let mdp = iid_mdp(space, sensors, beta)?;
    let n = space.len();
    let radix = space.sensors() + 1;

    // slot[k][i]: position of (stage k, state i) among the decision digits
    let mut slot = vec![vec![None; n]; horizon];
    let mut pairs = Vec::new();
    let mut frontier = vec![initial];
    for (k, row) in slot.iter_mut().enumerate() {
        let mut next = Vec::new();
        for &i in &frontier {
            row[i] = Some(pairs.len());
            pairs.push((k, i));
            for c in &mdp.choices[i] {
                for &(j, _) in &c.transitions {
                    if !next.contains(&j) {
                        next.push(j);
                    }
                }
            }
        }
        next.sort_unstable();
        frontier = next;
    }

    let mut required: u128 = 1;
    for _ in 0..pairs.len() {
        required = required.saturating_mul(radix as u128);
        if required > ORACLE_EVALUATION_LIMIT {
            return Err(Error::SizeGuard {
                required,
                limit: ORACLE_EVALUATION_LIMIT,
            });
        }
    }

    let mut digits = vec![0usize; pairs.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluations = 0u64;
    let mut dist = vec![0.0; n];
    let mut next = vec![0.0; n];
    loop {
        evaluations += 1;
        dist.iter_mut().for_each(|x| *x = 0.0);
        dist[initial] = 1.0;
        let mut cost = 0.0;
        for row in &slot {
            next.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..n {
                let mass = dist[i];
                if mass == 0.0 {
                    continue;
                }
                let Some(d) = row[i] else { continue };
                let c = &mdp.choices[i][digits[d]];
                cost += mass * c.cost;
                for &(j, p) in &c.transitions {
                    next[j] += mass * p;
                }
            }
            core::mem::swap(&mut dist, &mut next);
        }
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, digits.clone()));
        }

        // advance the mixed-radix counter
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let (cost, digits) = best.expect("at least one policy evaluated");
                let mut actions = vec![vec![Action::Idle; n]; horizon];
                for (d, &(k, i)) in pairs.iter().enumerate() {
                    actions[k][i] = mdp.action(i, digits[d]);
                }
                return Ok(OracleResult {
                    policy: FinitePolicy { horizon, actions },
                    cost,
                    evaluations,
                });
            }
            digits[pos] += 1;
            if digits[pos] < radix {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
