use std::path::Path;

use estsched::sim::{run_simulation, EstimatorStats, Estimators, PolicySource, Seeds, SimConfig, SimResult};
use estsched::{build_state_space, SensorModel, SystemModel};
use serde_json::{json, Value};

use super::{load_policy, solve::solve_one, stat_json};
use crate::artifact::{Cell, Sink};
use crate::config::{matrix, ExperimentConfig, PolicyChoice};
use crate::error::CliError;

fn estimator_json(s: &EstimatorStats) -> Value {
    json!({"trace": stat_json(&s.trace), "sq_error": stat_json(&s.sq_error)})
}

pub fn policy_source(
    cfg: &ExperimentConfig,
    model: &SystemModel,
    sensors: &[SensorModel],
) -> Result<PolicySource, CliError> {
    Ok(match &cfg.simulation.policy {
        PolicyChoice::Solve => {
            let beta = cfg.solver.single_beta()?;
            let space = build_state_space(model, sensors, cfg.solver.depth)?;
            solve_one(cfg, &space, sensors, cfg.markov()?, beta)?.policy.into_source()?
        }
        PolicyChoice::File(path) => load_policy(Path::new(path))?.into_source()?,
        PolicyChoice::Baseline(t) => PolicySource::Baseline(t.clone()),
        PolicyChoice::Always => PolicySource::Always,
        PolicyChoice::Never => PolicySource::Never,
        PolicyChoice::RandomSingle => PolicySource::RandomSingle,
    })
}

/// The simulation part of the config, minus the policy.
pub fn sim_config(
    cfg: &ExperimentConfig,
    model: SystemModel,
    sensors: Vec<SensorModel>,
    policy: PolicySource,
) -> Result<SimConfig, CliError> {
    let sim = &cfg.simulation;
    let channels = cfg.channels(&sensors)?;
    let mut sc = SimConfig::new(model, sensors, policy);
    sc.channels = channels;
    sc.depth = cfg.solver.depth;
    sc.steps = sim.steps;
    sc.replications = sim.replications;
    sc.seeds = Seeds::from_master(cfg.seed);
    sc.burn_in = sim.burn_in;
    sc.batches = sim.batches;
    sc.trace_limit = sim.trace_steps;
    sc.estimators = Estimators {
        optimal: sim.estimators.optimal,
        measurement: sim.estimators.measurement,
    };
    sc.initial_cov = sim
        .initial_cov
        .as_ref()
        .map(|rows| matrix("simulation.initial_cov", rows))
        .transpose()?;
    Ok(sc)
}

pub fn summary_json(out: &SimResult) -> Value {
    json!({
        "recorded_steps": out.recorded_steps,
        "avg_energy": stat_json(&out.avg_energy),
        "constant_gain": estimator_json(&out.constant_gain),
        "optimal": out.optimal.as_ref().map(estimator_json),
        "measurement": out.measurement.as_ref().map(estimator_json),
        "scheduled": out.scheduled,
        "transmissions": out.transmissions,
        "deliveries": out.deliveries,
        "collisions": out.collisions,
        "feedback_losses": out.feedback_losses,
        "boundary_visits": out.boundary_visits,
        "channel_success": out.channel_success,
        "occupancy": out.occupancy,
    })
}

pub fn run(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let (model, sensors) = cfg.model()?;
    let policy = policy_source(cfg, &model, &sensors)?;
    let sc = sim_config(cfg, model, sensors, policy)?;
    let out = run_simulation(&sc)?;
    sink.write_json("summary.json", "simulate", summary_json(&out))?;
    if !out.trace.is_empty() {
        let rows: Vec<Vec<Cell>> = out
            .trace
            .iter()
            .map(|r| {
                vec![
                    Cell::from(r.step),
                    Cell::from(r.state),
                    Cell::from(r.action),
                    Cell::from(r.gamma),
                    Cell::from(r.trace()),
                ]
            })
            .collect();
        sink.write_csv("trace.csv", &["step", "state", "action", "gamma", "trace"], &rows)?;
    }
    sink.note(format!(
        "energy {:.6}, constant-gain trace {:.6}",
        out.avg_energy.mean, out.constant_gain.trace.mean
    ));
    Ok(())
}
