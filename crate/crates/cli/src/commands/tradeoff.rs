use estsched::analysis::tradeoff_curve;
use estsched::sim::{baseline_sweep, dp_tradeoff, low_covariance_dominance, CurvePoint, PolicySource};
use serde_json::{json, Value};

use super::simulate::sim_config;
use crate::artifact::{Cell, Sink};
use crate::config::ExperimentConfig;
use crate::error::CliError;

fn point_json(p: &CurvePoint) -> Value {
    json!({"parameter": p.parameter, "energy": p.energy, "covariance": p.covariance})
}

fn curve_rows(points: &[CurvePoint]) -> Vec<Vec<Cell>> {
    points
        .iter()
        .map(|p| vec![Cell::from(p.parameter), Cell::from(p.energy), Cell::from(p.covariance)])
        .collect()
}

/// Simulated DP curve over `tradeoff.betas` against the round-robin
/// baseline over `tradeoff.baseline_thresholds`. Covariance is the empirical
/// mean squared error of the constant-gain estimate.
pub fn run(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    if cfg.markov()?.is_some() {
        return Err(CliError::config("the tradeoff sweep uses i.i.d. links"));
    }
    if cfg.tradeoff.betas.is_empty() {
        return Err(CliError::config("tradeoff.betas is empty"));
    }
    let (model, sensors) = cfg.model()?;
    let template = sim_config(cfg, model.clone(), sensors.clone(), PolicySource::Never)?;
    let dp = dp_tradeoff(&template, &cfg.tradeoff.betas, &cfg.solver.rvi())?;
    sink.write_csv("tradeoff_dp.csv", &["beta", "energy", "covariance"], &curve_rows(&dp))?;
    let baseline = baseline_sweep(&template, &cfg.tradeoff.baseline_thresholds)?;
    if !baseline.is_empty() {
        sink.write_csv("baseline.csv", &["T", "energy", "covariance"], &curve_rows(&baseline))?;
    }

    let mut analytic = Value::Null;
    if sensors.len() == 1 {
        let curve = tradeoff_curve(&model, &sensors[0], &cfg.tradeoff.betas, cfg.solver.depth, &cfg.solver.rvi())?;
        let rows: Vec<Vec<Cell>> = curve
            .iter()
            .map(|p| {
                vec![
                    Cell::from(p.beta),
                    p.threshold.map_or(Cell::from(""), Cell::from),
                    Cell::from(p.expected_energy),
                    Cell::from(p.expected_cov_trace),
                    Cell::from(p.avg_cost),
                ]
            })
            .collect();
        sink.write_csv(
            "tradeoff_analytic.csv",
            &["beta", "threshold", "expected_energy", "expected_cov_trace", "avg_cost"],
            &rows,
        )?;
        analytic = curve
            .iter()
            .map(|p| {
                json!({
                    "beta": p.beta,
                    "threshold": p.threshold,
                    "expected_energy": p.expected_energy,
                    "expected_cov_trace": p.expected_cov_trace,
                })
            })
            .collect();
    }

    let dominance = low_covariance_dominance(&dp, &baseline).map(|d| {
        sink.note(format!(
            "lowest-covariance baseline point T={} (energy {:.4}, cov {:.4}); DP curve reaches {:.4}",
            d.baseline.parameter, d.baseline.energy, d.baseline.covariance, d.dp_covariance
        ));
        json!({
            "baseline": point_json(&d.baseline),
            "dp_covariance": d.dp_covariance,
            "dp_points": [point_json(&d.dp_points.0), point_json(&d.dp_points.1)],
            "holds": d.holds(),
        })
    });
    sink.write_json(
        "tradeoff.json",
        "tradeoff",
        json!({
            "dp": dp.iter().map(point_json).collect::<Vec<_>>(),
            "baseline": baseline.iter().map(point_json).collect::<Vec<_>>(),
            "analytic": analytic,
            "dominance": dominance,
        }),
    )?;
    Ok(())
}
