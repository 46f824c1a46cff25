use estsched::scheduler::{action_boundaries, meas_gain_trace};
use estsched::{dare_steady_state, instances, linalg};
use serde_json::{json, Value};

use crate::artifact::Sink;
use crate::config::matrix_rows;
use crate::error::CliError;

/// Reference values and the tolerance they are checked to.
const TRACES: [f64; 2] = [1.2862, 1.1970];
const BOUNDARIES: [f64; 3] = [0.5485, 0.8642, 3.9005];
const TOL: f64 = 1e-3;

/// Measurement-transmission instances where the covariance-case structure
/// breaks. Returns the report and whether every reference value matched.
pub fn reproduce() -> Result<(Value, bool), CliError> {
    let inst = instances::nonmonotone_vector();
    let p = dare_steady_state(&inst.model, &inst.sensors[0])?.post_cov;
    let upper = instances::nonmonotone_upper();
    let gap = linalg::min_eigenvalue(&(&upper - &p));
    let lo = meas_gain_trace(&inst.model, &inst.sensors[0], &p)?;
    let hi = meas_gain_trace(&inst.model, &inst.sensors[0], &upper)?;
    let traces_ok = gap > 0.0 && (lo - TRACES[0]).abs() < TOL && (hi - TRACES[1]).abs() < TOL;
    // a larger covariance gaining less from a measurement is the expected
    // counterexample
    let nonmonotone = gap > 0.0 && hi < lo;

    let inst = instances::split_band_scalar();
    let bounds = action_boundaries(&inst.model, &inst.sensors, inst.beta, 0.0, 6.0, 6001)?;
    let at: Vec<f64> = bounds.iter().map(|b| b.at).collect();
    let bounds_ok = at.len() == BOUNDARIES.len() && at.iter().zip(BOUNDARIES).all(|(g, w)| (g - w).abs() < TOL);

    let report = json!({
        "nonmonotone_gain": {
            "lower_cov": matrix_rows(&p),
            "upper_cov": matrix_rows(&upper),
            "min_eig_upper_minus_lower": gap,
            "gain_trace_lower": lo,
            "gain_trace_upper": hi,
            "reference": TRACES,
            "expected_counterexample": nonmonotone,
            "matches_reference": traces_ok,
        },
        "split_band": {
            "boundaries": bounds.iter().map(|b| json!({
                "at": b.at,
                "from": b.from.code(),
                "to": b.to.code(),
            })).collect::<Vec<_>>(),
            "reference": BOUNDARIES,
            "matches_reference": bounds_ok,
        },
        "tolerance": TOL,
    });
    Ok((report, traces_ok && nonmonotone && bounds_ok))
}

pub fn run(sink: &Sink) -> Result<(), CliError> {
    let (report, ok) = reproduce()?;
    sink.write_json("counterexamples.json", "counterexamples", report)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Violation("counterexample reproduction differs from the reference values".into()))
    }
}
