//! Experiment configuration: one JSON document, matrices as row-major
//! nested arrays. Unknown keys are rejected and every default is written
//! back out in the echoed copy.

use std::fs;
use std::path::Path;

use estsched::instances::{self, Instance};
use estsched::scheduler::RviOptions;
use estsched::{ChannelModel, Matrix, SensorModel, SystemModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Named instance that fills in `system`, `sensors` and `solver.beta`
    /// where they are absent.
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub sensors: Option<Vec<SensorConfig>>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub tradeoff: TradeoffConfig,
    #[serde(default)]
    pub table1: Table1Config,
    /// Master seed for every random stream.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".into()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            system: None,
            sensors: None,
            channel: ChannelConfig::default(),
            solver: SolverConfig::default(),
            simulation: SimulationConfig::default(),
            tradeoff: TradeoffConfig::default(),
            table1: Table1Config::default(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 2-state plant, one sensor `C = [1 1]`.
    SingleSensor,
    /// Scalar plant, two scalar sensors with equal energy costs.
    TwoScalarSensors,
    /// 2-state plant, two vector sensors.
    TwoVectorSensors,
    /// 2-state plant whose measurement-transmission value is not monotone.
    NonmonotoneVector,
    /// Scalar two-sensor measurement-transmission instance.
    SplitBandScalar,
}

impl Preset {
    pub fn instance(self) -> Instance {
        match self {
            Preset::SingleSensor => instances::single_sensor(),
            Preset::TwoScalarSensors => instances::two_scalar_sensors(1.0),
            Preset::TwoVectorSensors => instances::two_vector_sensors(),
            Preset::NonmonotoneVector => instances::nonmonotone_vector(),
            Preset::SplitBandScalar => instances::split_band_scalar(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub c: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// Delivery probability of the link.
    pub lambda: f64,
    /// Energy spent per transmission.
    pub energy: f64,
    /// Probability that the scheduling decision reaches the sensor.
    #[serde(default = "one")]
    pub feedback_lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    /// Independent drops at each sensor's `lambda`.
    #[default]
    Iid,
    /// Gilbert-Elliott links: failure rate `p`, recovery rate `q`.
    Markov { p: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub beta: Option<f64>,
    /// Solve once per entry instead of at `beta`.
    pub betas: Option<Vec<f64>>,
    /// Finite horizon `K`; the average-cost problem when absent.
    pub horizon: Option<usize>,
    /// States per sensor chain.
    pub depth: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub aperiodicity: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let rvi = RviOptions::default();
        Self {
            beta: None,
            betas: None,
            horizon: None,
            depth: 20,
            epsilon: rvi.epsilon,
            max_iterations: rvi.max_iterations,
            aperiodicity: rvi.aperiodicity,
        }
    }
}

impl SolverConfig {
    pub fn rvi(&self) -> RviOptions {
        RviOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            aperiodicity: self.aperiodicity,
        }
    }

    pub fn beta_grid(&self) -> Result<Vec<f64>, CliError> {
        match (&self.betas, self.beta) {
            (Some(_), Some(_)) => Err(CliError::config("give solver.beta or solver.betas, not both")),
            (Some(b), None) if b.is_empty() => Err(CliError::config("solver.betas is empty")),
            (Some(b), None) => Ok(b.clone()),
            (None, Some(b)) => Ok(vec![b]),
            (None, None) => Err(CliError::config("solver.beta is required (or a preset that sets it)")),
        }
    }

    pub fn single_beta(&self) -> Result<f64, CliError> {
        match self.beta_grid()?.as_slice() {
            [b] => Ok(*b),
            _ => Err(CliError::config("this command takes a single solver.beta")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    /// Solve the configured problem first and simulate its policy.
    Solve,
    /// Policy table from a `solve` artifact.
    File(String),
    /// Round robin with per-sensor distance thresholds.
    Baseline(Vec<f64>),
    Always,
    Never,
    RandomSingle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorChoice {
    pub optimal: bool,
    pub measurement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub policy: PolicyChoice,
    pub steps: usize,
    pub replications: usize,
    pub burn_in: f64,
    pub batches: usize,
    /// Leading steps of replication 0 written to `trace.csv`; 0 for none.
    pub trace_steps: usize,
    pub estimators: EstimatorChoice,
    /// Covariance of the initial state; the steady-state `P̄_1` when absent.
    pub initial_cov: Option<Vec<Vec<f64>>>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            policy: PolicyChoice::Solve,
            steps: 100_000,
            replications: 1,
            burn_in: 0.01,
            batches: 20,
            trace_steps: 0,
            estimators: EstimatorChoice::default(),
            initial_cov: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffConfig {
    /// Weights for the DP curve.
    pub betas: Vec<f64>,
    /// Common threshold `T` of the round-robin baseline, one point each.
    pub baseline_thresholds: Vec<f64>,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            betas: (1..20).map(|i| i as f64 / 20.0).collect(),
            baseline_thresholds: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub draws: usize,
    pub steps: usize,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            draws: 20,
            steps: 100_000,
        }
    }
}

/// Parses `text`, reporting the failing field path and position.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            CliError::config(inner.to_string())
        } else {
            CliError::config(format!("field `{path}`: {inner}"))
        }
    })?;
    Ok(cfg.materialize())
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(CliError::config(format!("`{name}` must be a non-empty matrix")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::config(format!("`{name}` has rows of different lengths")));
    }
    Ok(Matrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

impl ExperimentConfig {
    /// Fills preset fields so the echoed copy is complete.
    fn materialize(mut self) -> Self {
        if let Some(p) = self.preset {
            let inst = p.instance();
            if self.system.is_none() {
                self.system = Some(SystemConfig {
                    a: matrix_rows(inst.model.a()),
                    q: matrix_rows(inst.model.q()),
                });
            }
            if self.sensors.is_none() {
                self.sensors = Some(
                    inst.sensors
                        .iter()
                        .map(|s| SensorConfig {
                            c: matrix_rows(s.c()),
                            r: matrix_rows(s.r()),
                            lambda: s.lambda(),
                            energy: s.energy_cost(),
                            feedback_lambda: s.feedback_lambda(),
                        })
                        .collect(),
                );
            }
            if self.solver.beta.is_none() && self.solver.betas.is_none() {
                self.solver.beta = Some(inst.beta);
            }
        }
        self
    }

    pub fn model(&self) -> Result<(SystemModel, Vec<SensorModel>), CliError> {
        let sys = self
            .system
            .as_ref()
            .ok_or_else(|| CliError::config("`system` is required (or a preset)"))?;
        let model = SystemModel::new(matrix("system.a", &sys.a)?, matrix("system.q", &sys.q)?)?;
        let sensors = self
            .sensors
            .as_ref()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CliError::config("`sensors` is required (or a preset)"))?;
        let sensors = sensors
            .iter()
            .enumerate()
            .map(|(i, s)| -> Result<SensorModel, CliError> {
                let c = matrix(&format!("sensors[{i}].c"), &s.c)?;
                let r = matrix(&format!("sensors[{i}].r"), &s.r)?;
                let sensor = SensorModel::new(c, r, s.lambda, s.energy)?.with_feedback_lambda(s.feedback_lambda)?;
                model.check_sensor(&sensor)?;
                Ok(sensor)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((model, sensors))
    }

    /// One link model per sensor.
    pub fn channels(&self, sensors: &[SensorModel]) -> Result<Vec<ChannelModel>, CliError> {
        sensors
            .iter()
            .map(|s| match self.channel {
                ChannelConfig::Iid => Ok(ChannelModel::iid(s.lambda())?),
                ChannelConfig::Markov { p, q } => Ok(ChannelModel::markov(p, q)?),
            })
            .collect()
    }

    /// The Gilbert-Elliott link, when configured.
    pub fn markov(&self) -> Result<Option<ChannelModel>, CliError> {
        match self.channel {
            ChannelConfig::Iid => Ok(None),
            ChannelConfig::Markov { p, q } => Ok(Some(ChannelModel::markov(p, q)?)),
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.tradeoff.betas.len(), 19);
    }

    #[test]
    fn preset_is_materialized() {
        let cfg = parse(r#"{"preset": "single_sensor"}"#).unwrap();
        assert_eq!(cfg.solver.beta, Some(0.05));
        let (model, sensors) = cfg.model().unwrap();
        assert_eq!(model.dim(), 2);
        assert_eq!(sensors.len(), 1);
        let again = parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_name_the_path() {
        let err = parse(r#"{"solver": {"depht": 3}}"#).unwrap_err().to_string();
        assert!(err.contains("solver"), "{err}");
        assert!(err.contains("depht"), "{err}");
        assert!(err.contains("line 1"), "{err}");
        let err = parse(r#"{"channel": {"kind": "markov", "p": 0.1, "q": 0.2, "r": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn policies_parse() {
        let cfg = parse(r#"{"simulation": {"policy": {"baseline": [1.0, 2.0]}}}"#).unwrap();
        assert_eq!(cfg.simulation.policy, PolicyChoice::Baseline(vec![1.0, 2.0]));
        let cfg = parse(r#"{"simulation": {"policy": "random_single"}}"#).unwrap();
        assert_eq!(cfg.simulation.policy, PolicyChoice::RandomSingle);
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        let cfg = parse(
            r#"{"system": {"a": [[1, 0], [0]], "q": [[1, 0], [0, 1]]},
                "sensors": [{"c": [[1, 0]], "r": [[1]], "lambda": 0.5, "energy": 1}]}"#,
        )
        .unwrap();
        assert!(cfg.model().unwrap_err().to_string().contains("different lengths"));
    }
}
