pub mod counterexamples;
pub mod simulate;
pub mod solve;
pub mod table1;
pub mod tradeoff;
pub mod verify;

use std::fs;
use std::path::Path;

use estsched::scheduler::{FinitePolicy, ThresholdShape};
use estsched::sim::{PolicySource, Stat};
use estsched::Action;
use serde_json::{json, Value};

use crate::error::CliError;
use solve::PolicyTable;

/// Artifact action codes: 0 idle, `m` for sensor `m` (1-based).
pub fn codes(actions: &[Action]) -> Vec<usize> {
    actions.iter().map(|a| a.code()).collect()
}

pub fn stat_json(s: &Stat) -> Value {
    json!({"mean": s.mean, "std_error": s.std_error})
}

pub fn shape_json(shape: &ThresholdShape) -> Value {
    let bands: Vec<Value> = shape
        .bands()
        .iter()
        .map(|b| json!({"action": b.action.code(), "start": b.start, "state": b.state, "trace": b.trace}))
        .collect();
    let kind = match shape {
        ThresholdShape::NotTotallyOrdered => "not_totally_ordered",
        ThresholdShape::Banded(_) => "banded",
        ThresholdShape::Violation(_) => "violation",
    };
    json!({
        "kind": kind,
        "bands": bands,
        "scenario": shape.scenario().map(|s| s.label()),
    })
}

impl PolicyTable {
    pub fn into_source(self) -> Result<PolicySource, CliError> {
        Ok(match self {
            PolicyTable::Stationary(a) => PolicySource::Stationary(a),
            PolicyTable::Finite(actions) => PolicySource::Finite(FinitePolicy {
                horizon: actions.len(),
                actions,
            }),
            PolicyTable::Markov(s) => PolicySource::MarkovSlices(s),
            PolicyTable::MarkovFinite(_) => {
                return Err(CliError::config(
                    "finite-horizon Markov-channel policies cannot be simulated; drop solver.horizon",
                ))
            }
        })
    }
}

fn actions(v: &Value, what: &str) -> Result<Vec<Action>, CliError> {
    let arr = v
        .as_array()
        .ok_or_else(|| CliError::config(format!("policy artifact: `{what}` is not an array")))?;
    arr.iter()
        .map(|c| {
            c.as_u64()
                .map(|c| Action::from_code(c as usize))
                .ok_or_else(|| CliError::config(format!("policy artifact: bad action code in `{what}`")))
        })
        .collect()
}

fn table_list(v: &Value, what: &str) -> Result<Vec<Vec<Action>>, CliError> {
    v.as_array()
        .ok_or_else(|| CliError::config(format!("policy artifact: `{what}` is not an array")))?
        .iter()
        .map(|t| actions(t, what))
        .collect()
}

/// Reads the decision table of a `solve` artifact.
pub fn load_policy(path: &Path) -> Result<PolicyTable, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("policy file {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("policy file {}: {e}", path.display())))?;
    let p = &doc["result"]["policy"];
    match p["kind"].as_str() {
        Some("stationary") => Ok(PolicyTable::Stationary(actions(&p["actions"], "actions")?)),
        Some("finite") => Ok(PolicyTable::Finite(table_list(&p["stages"], "stages")?)),
        Some("markov") => {
            let mut s = table_list(&p["slices"], "slices")?;
            if s.len() != 2 {
                return Err(CliError::config("policy artifact: need two Markov slices"));
            }
            let one = s.pop().expect("two slices");
            let zero = s.pop().expect("two slices");
            Ok(PolicyTable::Markov([zero, one]))
        }
        Some("markov_finite") => Ok(PolicyTable::MarkovFinite(Vec::new())),
        _ => Err(CliError::config(format!(
            "{} is not a policy artifact (no result.policy.kind)",
            path.display()
        ))),
    }
}
