use estsched::scheduler::{
    extract_thresholds, solve_finite_horizon, solve_infinite_horizon, solve_markov_drops, stage_cost_with,
    MarkovHorizon, ThresholdShape,
};
use estsched::{build_state_space, Action, ChannelModel, SensorModel, StateSpace};
use serde_json::{json, Value};

use super::{codes, shape_json};
use crate::artifact::{Cell, Sink};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Summary of one solved weight, for the tradeoff table.
pub struct Solved {
    pub beta: f64,
    pub json: Value,
    pub threshold: Option<usize>,
    /// Long-run energy and covariance trace; average-cost problems only.
    pub energy: Option<f64>,
    pub cov_trace: Option<f64>,
    pub cost: f64,
    pub policy: PolicyTable,
}

/// Decision tables in artifact form.
pub enum PolicyTable {
    Stationary(Vec<Action>),
    Finite(Vec<Vec<Action>>),
    Markov([Vec<Action>; 2]),
    MarkovFinite(Vec<[Vec<Action>; 2]>),
}

impl PolicyTable {
    pub fn json(&self) -> Value {
        match self {
            PolicyTable::Stationary(a) => json!({"kind": "stationary", "actions": codes(a)}),
            PolicyTable::Finite(s) => {
                json!({"kind": "finite", "stages": s.iter().map(|a| codes(a)).collect::<Vec<_>>()})
            }
            PolicyTable::Markov([a, b]) => json!({"kind": "markov", "slices": [codes(a), codes(b)]}),
            PolicyTable::MarkovFinite(s) => json!({
                "kind": "markov_finite",
                "stages": s.iter().map(|[a, b]| json!([codes(a), codes(b)])).collect::<Vec<_>>(),
            }),
        }
    }
}

fn states_json(space: &StateSpace, actions: &[Action], values: &[f64], stationary: Option<&[f64]>) -> Vec<Value> {
    (0..space.len())
        .map(|i| {
            let tag = space.tag(i);
            let mut v = json!({
                "index": i,
                "sensor": tag.sensor + 1,
                "hops": tag.hops,
                "trace": space.state(i).trace,
                "action": actions[i].code(),
                "value": values[i],
            });
            if let Some(pi) = stationary {
                v["stationary"] = json!(pi[i]);
            }
            v
        })
        .collect()
}

/// Long-run energy and covariance trace under a stationary distribution.
fn split_cost(space: &StateSpace, sensors: &[SensorModel], actions: &[Action], pi: &[f64]) -> (f64, f64) {
    let mut energy = 0.0;
    let mut cov = 0.0;
    for (i, (&a, &p)) in actions.iter().zip(pi).enumerate() {
        let success = a.sensor().map_or(0.0, |m| sensors[m].effective_lambda());
        energy += p * stage_cost_with(space, sensors, 0.0, i, a, success);
        cov += p * stage_cost_with(space, sensors, 1.0, i, a, success);
    }
    (energy, cov)
}

fn first_transmit(shape: &ThresholdShape, space: &StateSpace) -> Option<usize> {
    shape.first_transmit(space.len()).filter(|&t| t < space.len())
}

pub fn solve_one(
    cfg: &ExperimentConfig,
    space: &StateSpace,
    sensors: &[SensorModel],
    markov: Option<ChannelModel>,
    beta: f64,
) -> Result<Solved, CliError> {
    let depth = space.depth();
    match (markov, cfg.solver.horizon) {
        (None, None) => {
            let sol = solve_infinite_horizon(space, sensors, beta, &cfg.solver.rvi())?;
            let shape = extract_thresholds(&sol.policy.actions, space);
            let threshold = first_transmit(&shape, space);
            let (energy, cov) = split_cost(space, sensors, &sol.policy.actions, &sol.stationary);
            let policy = PolicyTable::Stationary(sol.policy.actions.clone());
            let json = json!({
                "problem": "average_cost",
                "beta": beta,
                "depth": depth,
                "sensors": sensors.len(),
                "avg_cost": sol.avg_cost(),
                "bellman_residual": sol.bellman_residual,
                "iterations": sol.iterations,
                "boundary_mass": sol.boundary_mass,
                "expected_energy": energy,
                "expected_cov_trace": cov,
                "threshold": threshold,
                "shape": shape_json(&shape),
                "policy": policy.json(),
                "states": states_json(space, &sol.policy.actions, &sol.value.values, Some(&sol.stationary)),
            });
            Ok(Solved {
                beta,
                json,
                threshold,
                energy: Some(energy),
                cov_trace: Some(cov),
                cost: sol.avg_cost(),
                policy,
            })
        }
        (None, Some(horizon)) => {
            let sol = solve_finite_horizon(space, sensors, beta, horizon)?;
            let shapes: Vec<ThresholdShape> =
                sol.policy.actions.iter().map(|a| extract_thresholds(a, space)).collect();
            let thresholds: Vec<Option<usize>> = shapes.iter().map(|s| first_transmit(s, space)).collect();
            let cost = sol.cost_from(space.root(0));
            let json = json!({
                "problem": "finite_horizon",
                "beta": beta,
                "depth": depth,
                "sensors": sensors.len(),
                "horizon": horizon,
                "cost_from_root": cost,
                "threshold": thresholds[0],
                "stage_thresholds": thresholds,
                "stage_shapes": shapes.iter().map(shape_json).collect::<Vec<_>>(),
                "policy": PolicyTable::Finite(sol.policy.actions.clone()).json(),
                "values": sol.values.iter().map(|v| v.values.clone()).collect::<Vec<_>>(),
            });
            Ok(Solved {
                beta,
                json,
                threshold: thresholds[0],
                energy: None,
                cov_trace: None,
                cost,
                policy: PolicyTable::Finite(sol.policy.actions),
            })
        }
        (Some(channel), horizon) => {
            if sensors.len() != 1 {
                return Err(CliError::config("a Markov channel is solved for a single sensor only"));
            }
            let mode = match horizon {
                Some(k) => MarkovHorizon::Finite(k),
                None => MarkovHorizon::Infinite(cfg.solver.rvi()),
            };
            let sol = solve_markov_drops(space, &sensors[0], &channel, beta, mode)?;
            let thresholds: Vec<[Option<usize>; 2]> = (0..sol.policies.len()).map(|k| sol.thresholds(k)).collect();
            let (p, q) = channel.failure_recovery();
            let (policy, problem) = if horizon.is_some() {
                (PolicyTable::MarkovFinite(sol.policies.clone()), "markov_finite_horizon")
            } else {
                (PolicyTable::Markov(sol.policies[0].clone()), "markov_average_cost")
            };
            // a single threshold only when both slices agree
            let [t0, t1] = thresholds[0];
            let threshold = t0.filter(|_| t0 == t1 && t0.is_some_and(|t| t < depth));
            let cost = sol.avg_cost.unwrap_or_else(|| sol.values[0][1][space.root(0)]);
            let json = json!({
                "problem": problem,
                "beta": beta,
                "depth": depth,
                "channel": {"p": p, "q": q},
                "avg_cost": sol.avg_cost,
                "bellman_residual": sol.bellman_residual,
                "iterations": sol.iterations,
                "boundary_mass": sol.boundary_mass,
                "heuristic_stability_guard": sol.heuristic_stability_guard,
                "threshold": threshold,
                "slice_thresholds": thresholds,
                "policy": policy.json(),
                "values": sol.values,
            });
            Ok(Solved {
                beta,
                json,
                threshold,
                energy: None,
                cov_trace: None,
                cost,
                policy,
            })
        }
    }
}

pub fn run(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let (model, sensors) = cfg.model()?;
    let betas = cfg.solver.beta_grid()?;
    let space = build_state_space(&model, &sensors, cfg.solver.depth)?;
    let markov = cfg.markov()?;
    let grid = cfg.solver.betas.is_some();
    let mut rows = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let solved = solve_one(cfg, &space, &sensors, markov, beta)?;
        let name = if grid { format!("policy_beta_{i:02}.json") } else { "policy.json".into() };
        sink.write_json(&name, "solve", solved.json.clone())?;
        sink.note(format!(
            "beta {beta}: threshold {}, cost {:.6}",
            solved.threshold.map_or("none".into(), |t| t.to_string()),
            solved.cost
        ));
        rows.push(vec![
            Cell::from(solved.beta),
            solved.threshold.map_or(Cell::from(""), Cell::from),
            solved.energy.map_or(Cell::from(""), Cell::from),
            solved.cov_trace.map_or(Cell::from(""), Cell::from),
            Cell::from(solved.cost),
            Cell::from(name),
        ]);
    }
    if grid {
        sink.write_csv(
            "tradeoff.csv",
            &["beta", "threshold", "expected_energy", "expected_cov_trace", "cost", "artifact"],
            &rows,
        )?;
    }
    Ok(())
}
