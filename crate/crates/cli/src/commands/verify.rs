use estsched::remote::verify_constant_gain_fixed_point;
use estsched::scheduler::{
    check_stability, extract_thresholds, solve_finite_horizon, solve_infinite_horizon, verify_finite_structure,
    verify_structure, StructureReport, ThresholdShape, Violation,
};
use estsched::{build_state_space, dare_steady_state, settled_depth, Error};
use serde_json::{json, Value};

use super::{counterexamples, shape_json};
use crate::artifact::Sink;
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Horizon of the finite-horizon structure check when none is configured.
const DEFAULT_HORIZON: usize = 6;
/// Largest depth tried while waiting for the chain tops to coincide.
const MAX_DEPTH: usize = 300;
const RESIDUAL_TOL: f64 = 1e-8;

fn violation_json(v: &Violation) -> Value {
    match v {
        Violation::Value { stage, lower, upper, excess } => {
            json!({"kind": "value", "stage": stage, "lower": lower, "upper": upper, "excess": excess})
        }
        Violation::Phi { stage, sensor, lower, upper, excess } => json!({
            "kind": "phi", "stage": stage, "sensor": sensor + 1, "lower": lower, "upper": upper, "excess": excess,
        }),
        Violation::Psi { stage, first, second, states, excess } => json!({
            "kind": "psi", "stage": stage, "first": first + 1, "second": second + 1, "states": states,
            "excess": excess,
        }),
    }
}

fn report_json(r: &StructureReport) -> Value {
    json!({
        "pairs_checked": r.pairs_checked,
        "value_violations": r.value_violations(),
        "phi_violations": r.phi_violations(),
        "psi_violations": r.psi_violations(),
        // the first few are enough to locate a problem
        "violations": r.violations.iter().take(20).map(violation_json).collect::<Vec<_>>(),
    })
}

/// Structural battery on the configured instance plus the two
/// measurement-transmission reproductions.
pub fn run(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let (model, sensors) = cfg.model()?;
    let beta = cfg.solver.single_beta()?;
    let mut failures: Vec<String> = Vec::new();

    let mut filters = Vec::new();
    for (m, s) in sensors.iter().enumerate() {
        let f = dare_steady_state(&model, s)?;
        let residual = f.riccati_residual(&model, s)?;
        if residual > RESIDUAL_TOL * f.prior_cov.norm().max(1.0) {
            failures.push(format!("sensor {} Riccati residual {residual:e}", m + 1));
        }
        let cg = match verify_constant_gain_fixed_point(&model, s) {
            Ok(c) => {
                let worst = c.residuals.iter().fold(0.0, |a: f64, &r| a.max(r));
                if worst > RESIDUAL_TOL * c.p.norm().max(1.0) {
                    failures.push(format!("sensor {} constant-gain fixed point residual {worst:e}", m + 1));
                }
                json!({"residuals": c.residuals})
            }
            Err(e @ Error::StabilityPrecondition { .. }) => json!({"skipped": e.to_string()}),
            Err(e) => return Err(e.into()),
        };
        filters.push(json!({
            "sensor": m + 1,
            "post_cov_trace": f.post_cov.trace(),
            "riccati_residual": residual,
            "constant_gain_fixed_point": cg,
        }));
    }

    let depth = settled_depth(&model, &sensors, cfg.solver.depth, MAX_DEPTH, 1e-12)?;
    let space = build_state_space(&model, &sensors, depth)?;
    let chain = space.chain_order_violations();
    if sensors.len() == 1 && !chain.is_empty() {
        failures.push(format!("{} single-sensor chain order violations", chain.len()));
    }

    let horizon = cfg.solver.horizon.unwrap_or(DEFAULT_HORIZON);
    let fin = solve_finite_horizon(&space, &sensors, beta, horizon)?;
    let fin_report = verify_finite_structure(&fin, &space, &sensors, beta)?;
    if !fin_report.is_clean() {
        failures.push(format!("{} finite-horizon structure violations", fin_report.violations.len()));
    }

    check_stability(&model, &sensors)?;
    let inf = solve_infinite_horizon(&space, &sensors, beta, &cfg.solver.rvi())?;
    let inf_report = verify_structure(&inf.value.values, &space, &sensors, beta)?;
    if !inf_report.is_clean() {
        failures.push(format!("{} average-cost structure violations", inf_report.violations.len()));
    }
    let shape = extract_thresholds(&inf.policy.actions, &space);
    if matches!(shape, ThresholdShape::Violation(_)) {
        failures.push("average-cost policy along the ordered chain is not banded".into());
    }

    let (counter, counter_ok) = counterexamples::reproduce()?;
    if !counter_ok {
        failures.push("counterexample reproduction differs from the reference values".into());
    }

    sink.write_json(
        "verify.json",
        "verify",
        json!({
            "beta": beta,
            "depth": depth,
            "filters": filters,
            "totally_ordered": space.is_totally_ordered(),
            "incomparable_pairs": space.incomparable_pairs(),
            "chain_order_violations": chain.len(),
            "finite_horizon": {"horizon": horizon, "report": report_json(&fin_report)},
            "average_cost": {
                "avg_cost": inf.avg_cost(),
                "bellman_residual": inf.bellman_residual,
                "boundary_mass": inf.boundary_mass,
                "report": report_json(&inf_report),
                "shape": shape_json(&shape),
            },
            "counterexamples": counter,
            "failures": failures,
            "passed": failures.is_empty(),
        }),
    )?;
    if failures.is_empty() {
        sink.note("verify: all checks passed");
        Ok(())
    } else {
        Err(CliError::Violation(failures.join("; ")))
    }
}
