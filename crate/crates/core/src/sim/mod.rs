//! Seeded Monte Carlo simulation of the plant, the sensors and their local
//! filters, the lossy links and the remote estimators.
//!
//! Every random role draws from its own ChaCha20 stream: the key comes from
//! the role seed and the stream number is the replication index. Changing
//! the policy or the estimators therefore never perturbs the plant noise or
//! the channel realization.

mod channel;
mod experiments;
mod stats;

pub use channel::channel_step;
pub use experiments::{
    baseline_sweep, dp_tradeoff, low_covariance_dominance, table1_protocol, CurvePoint, Dominance,
    Table1Row,
};
pub use stats::Stat;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::localfilter::steady_state_all;
use crate::model::{ChannelModel, SensorModel, SystemModel};
use crate::remote::{
    meas_step, optimal_step, suboptimal_step, ConstantGainState, MeasRemoteState,
    OptimalRemoteState,
};
use crate::scheduler::{Action, FinitePolicy};
use crate::statespace::StateTag;
use stats::Batched;

/// Per-role seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub plant: u64,
    pub measurement: u64,
    pub channel: u64,
    pub feedback: u64,
    pub policy: u64,
}

impl Seeds {
    /// Role seeds as the first five outputs of ChaCha20 keyed by `master`.
    pub fn from_master(master: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master);
        Self {
            plant: rng.next_u64(),
            measurement: rng.next_u64(),
            channel: rng.next_u64(),
            feedback: rng.next_u64(),
            policy: rng.next_u64(),
        }
    }
}

fn stream(seed: u64, replication: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Who transmits at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    /// Table over the truncated space, indexed `sensor * depth + hops` with
    /// hops clamped at `depth - 1`.
    Stationary(Vec<Action>),
    /// Time-varying table; simulating past its horizon is a coverage error.
    Finite(FinitePolicy),
    /// Stationary tables for a previous step without (index 0) and with
    /// (index 1) a delivery.
    MarkovSlices([Vec<Action>; 2]),
    /// Round robin; the sensor in its slot transmits when its local estimate
    /// is farther than `T_m` (Euclidean) from the remote one. The remote
    /// estimate is made available to the sensors.
    Baseline(Vec<f64>),
    /// Every sensor transmits every step.
    Always,
    Never,
    /// One sensor chosen uniformly at each step.
    RandomSingle,
}

/// Remote estimators run besides the constant-gain one, which always runs
/// because it defines the scheduling state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Estimators {
    pub optimal: bool,
    pub measurement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: SystemModel,
    pub sensors: Vec<SensorModel>,
    /// One link per sensor.
    pub channels: Vec<ChannelModel>,
    pub policy: PolicySource,
    /// Truncation depth used for policy lookup, occupancy and boundary
    /// counts.
    pub depth: usize,
    pub steps: usize,
    pub replications: usize,
    pub seeds: Seeds,
    pub estimators: Estimators,
    /// Covariance of `x_0`; `P̄_1` when absent.
    pub initial_cov: Option<Matrix>,
    /// Fraction of leading steps left out of the averages.
    pub burn_in: f64,
    pub batches: usize,
    /// Steps of replication 0 to log.
    pub trace_limit: usize,
}

impl SimConfig {
    /// Defaults: i.i.d. links at each sensor's `lambda`, depth 50, `10^5`
    /// steps, one replication, seeds from master 0, 1% burn-in, 20 batches.
    pub fn new(model: SystemModel, sensors: Vec<SensorModel>, policy: PolicySource) -> Self {
        let channels = sensors
            .iter()
            .map(|s| ChannelModel::Iid { lambda: s.lambda() })
            .collect();
        Self {
            model,
            sensors,
            channels,
            policy,
            depth: 50,
            steps: 100_000,
            replications: 1,
            seeds: Seeds::from_master(0),
            estimators: Estimators::default(),
            initial_cov: None,
            burn_in: 0.01,
            batches: 20,
            trace_limit: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats {
    /// Time average of `tr P_{k|k}` as computed by the estimator.
    pub trace: Stat,
    /// Time average of `|x_k - x̂_{k|k}|^2`.
    pub sq_error: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub gamma: bool,
    pub trace_bits: u64,
}

impl TraceRow {
    /// `tr P̃_{k|k}` after the step.
    pub fn trace(&self) -> f64 {
        f64::from_bits(self.trace_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Averaged steps over all replications.
    pub recorded_steps: u64,
    pub constant_gain: EstimatorStats,
    pub optimal: Option<EstimatorStats>,
    pub measurement: Option<EstimatorStats>,
    pub avg_energy: Stat,
    pub scheduled: u64,
    pub transmissions: u64,
    pub deliveries: u64,
    pub collisions: u64,
    pub feedback_losses: u64,
    /// Recorded steps spent at the truncation top.
    pub boundary_visits: u64,
    /// Recorded visits per scheduling-state index.
    pub occupancy: Vec<u64>,
    /// Fraction of recorded steps with `gamma_m = 1`, per link.
    pub channel_success: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

/// `L` with `L L^T = m` for a symmetric PSD `m`.
fn gaussian_factor(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(linalg::symmetrize(m));
    let mut v = eig.eigenvectors;
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = libm::sqrt(lam.max(0.0));
        v.column_mut(j).scale_mut(s);
    }
    v
}

fn draw<R: Rng + ?Sized>(factor: &Matrix, rng: &mut R) -> Vector {
    let z = Vector::from_iterator(factor.ncols(), (0..factor.ncols()).map(|_| rng.sample(StandardNormal)));
    factor * z
}

fn validate(cfg: &SimConfig) -> Result<()> {
    let m = cfg.sensors.len();
    if m == 0 {
        return Err(Error::invalid("sensors", "at least one sensor is required"));
    }
    if cfg.channels.len() != m {
        return Err(Error::DimensionMismatch {
            context: "channels",
            expected: (m, 1),
            found: (cfg.channels.len(), 1),
        });
    }
    if cfg.steps == 0 || cfg.replications == 0 || cfg.depth == 0 {
        return Err(Error::invalid("steps", "steps, replications and depth must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.burn_in) {
        return Err(Error::invalid("burn_in", "must lie in [0, 1)"));
    }
    if cfg.batches < 2 {
        return Err(Error::invalid("batches", "need at least two batches"));
    }
    let table = m * cfg.depth;
    let check_table = |t: &[Action]| -> Result<()> {
        if t.len() != table {
            return Err(Error::DimensionMismatch {
                context: "policy table",
                expected: (table, 1),
                found: (t.len(), 1),
            });
        }
        if t.iter().any(|a| a.sensor().is_some_and(|s| s >= m)) {
            return Err(Error::invalid("policy", "action names a missing sensor"));
        }
        Ok(())
    };
    match &cfg.policy {
        PolicySource::Stationary(t) => check_table(t)?,
        PolicySource::Finite(p) => p.actions.iter().try_for_each(|t| check_table(t))?,
        PolicySource::MarkovSlices(s) => s.iter().try_for_each(|t| check_table(t))?,
        PolicySource::Baseline(th) => {
            if th.len() != m || th.iter().any(|t| t.is_nan() || *t < 0.0) {
                return Err(Error::invalid("thresholds", "need one nonnegative threshold per sensor"));
            }
        }
        _ => {}
    }
    if let Some(p0) = &cfg.initial_cov {
        linalg::check_square("initial_cov", p0, cfg.model.dim())?;
    }
    Ok(())
}

/// Runs every replication and aggregates in replication order.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult> {
    validate(cfg)?;
    let model = &cfg.model;
    let sensors = &cfg.sensors;
    let m_count = sensors.len();
    let n = model.dim();
    let filters = steady_state_all(model, sensors)?;
    let gains: Vec<Matrix> = filters.iter().map(|f| f.gain.clone()).collect();
    let sigma0 = cfg.initial_cov.clone().unwrap_or_else(|| filters[0].post_cov.clone());
    let x0_factor = gaussian_factor(&sigma0);
    let w_factor = gaussian_factor(model.q());
    let v_factors: Vec<Matrix> = sensors.iter().map(|s| gaussian_factor(s.r())).collect();
    let a = model.a();

    let burn = (cfg.steps as f64 * cfg.burn_in) as usize;
    let per_rep = cfg.steps - burn;
    let mut energy = Batched::new(cfg.batches, per_rep);
    let mut cg_trace = Batched::new(cfg.batches, per_rep);
    let mut cg_err = Batched::new(cfg.batches, per_rep);
    let mut opt_trace = Batched::new(cfg.batches, per_rep);
    let mut opt_err = Batched::new(cfg.batches, per_rep);
    let mut meas_trace = Batched::new(cfg.batches, per_rep);
    let mut meas_err = Batched::new(cfg.batches, per_rep);
    let mut out = SimResult {
        recorded_steps: 0,
        constant_gain: EstimatorStats {
            trace: Stat { mean: 0.0, std_error: 0.0 },
            sq_error: Stat { mean: 0.0, std_error: 0.0 },
        },
        optimal: None,
        measurement: None,
        avg_energy: Stat { mean: 0.0, std_error: 0.0 },
        scheduled: 0,
        transmissions: 0,
        deliveries: 0,
        collisions: 0,
        feedback_losses: 0,
        boundary_visits: 0,
        occupancy: vec![0; m_count * cfg.depth],
        channel_success: vec![0.0; m_count],
        trace: Vec::new(),
    };
    let mut link_hits = vec![0u64; m_count];

    for rep in 0..cfg.replications {
        let mut rng_plant = stream(cfg.seeds.plant, rep);
        let mut rng_meas = stream(cfg.seeds.measurement, rep);
        let mut rng_chan = stream(cfg.seeds.channel, rep);
        let mut rng_fb = stream(cfg.seeds.feedback, rep);
        let mut rng_pol = stream(cfg.seeds.policy, rep);

        let zero = Vector::zeros(n);
        let mut x = draw(&x0_factor, &mut rng_plant);
        let mut prior = vec![zero.clone(); m_count];
        let mut post = vec![zero.clone(); m_count];
        let mut cg = ConstantGainState::new(zero.clone(), StateTag::new(0, 0), filters[0].post_cov.clone());
        let mut opt = if cfg.estimators.optimal {
            // all estimates start at 0, so every prediction error equals x_0
            Some(OptimalRemoteState::new(
                zero.clone(),
                sigma0.clone(),
                vec![sigma0.clone(); m_count],
                vec![vec![sigma0.clone(); m_count]; m_count],
            )?)
        } else {
            None
        };
        let mut meas = cfg
            .estimators
            .measurement
            .then(|| MeasRemoteState::new(zero.clone(), sigma0.clone()));
        let mut link = vec![true; m_count];
        let mut delivered_prev = true;

        for k in 0..cfg.steps {
            let hops = cg.tag.hops.min(cfg.depth - 1);
            let state = cg.tag.sensor * cfg.depth + hops;
            let mut scheduled = vec![false; m_count];
            let mut one = |act: Action| {
                if let Action::Transmit(s) = act {
                    scheduled[s] = true;
                }
            };
            match &cfg.policy {
                PolicySource::Stationary(t) => one(t[state]),
                PolicySource::Finite(p) => {
                    if k >= p.horizon {
                        return Err(Error::PolicyCoverage {
                            state: format!("{} at stage {} beyond horizon {}", cg.tag, k + 1, p.horizon),
                        });
                    }
                    one(p.action(k + 1, state))
                }
                PolicySource::MarkovSlices(s) => one(s[delivered_prev as usize][state]),
                PolicySource::Baseline(th) => {
                    let slot = k % m_count;
                    if (&post[slot] - &cg.estimate).norm() > th[slot] {
                        scheduled[slot] = true;
                    }
                }
                PolicySource::Always => scheduled.iter_mut().for_each(|s| *s = true),
                PolicySource::Never => {}
                PolicySource::RandomSingle => {
                    let s = rng_pol.random_range(0..m_count);
                    scheduled[s] = true;
                }
            }

            let ys: Vec<Vector> = sensors
                .iter()
                .zip(&v_factors)
                .map(|(s, vf)| s.c() * &x + draw(vf, &mut rng_meas))
                .collect();
            for m in 0..m_count {
                post[m] = filters[m].update(&prior[m], &ys[m], &sensors[m]);
            }

            let mut transmitting = Vec::with_capacity(m_count);
            let mut lost = 0u64;
            for m in 0..m_count {
                let u: f64 = rng_fb.random();
                if scheduled[m] {
                    if u < sensors[m].feedback_lambda() {
                        transmitting.push(m);
                    } else {
                        lost += 1;
                    }
                }
            }
            for m in 0..m_count {
                link[m] = channel_step(&cfg.channels[m], link[m], &mut rng_chan);
            }
            let collision = transmitting.len() >= 2;
            let delivered = match transmitting.as_slice() {
                [s] if link[*s] => Some(*s),
                _ => None,
            };
            let act = match (delivered, scheduled.iter().position(|&s| s)) {
                (Some(s), _) | (None, Some(s)) => Action::Transmit(s),
                (None, None) => Action::Idle,
            };
            let gamma = delivered.is_some();

            cg = suboptimal_step(&cg, act, gamma, delivered.map(|s| (&post[s], &filters[s].post_cov)), model)?;
            if let Some(o) = &opt {
                opt = Some(optimal_step(o, act, gamma, delivered.map(|s| &post[s]), &gains, model, sensors)?);
            }
            if let Some(me) = &meas {
                meas = Some(meas_step(me, act, gamma, delivered.map(|s| &ys[s]), model, sensors)?);
            }

            if rep == 0 && k < cfg.trace_limit {
                out.trace.push(TraceRow {
                    step: k,
                    state,
                    action: act.code(),
                    gamma,
                    trace_bits: cg.cov.trace().to_bits(),
                });
            }
            if k >= burn {
                let i = k - burn;
                let e: f64 = transmitting.iter().map(|&s| sensors[s].energy_cost()).sum();
                energy.push(i, e);
                cg_trace.push(i, cg.cov.trace());
                cg_err.push(i, (&x - &cg.estimate).norm_squared());
                if let Some(o) = &opt {
                    opt_trace.push(i, o.post_cov.trace());
                    opt_err.push(i, (&x - &o.estimate_post).norm_squared());
                }
                if let Some(me) = &meas {
                    meas_trace.push(i, me.post_cov.trace());
                    meas_err.push(i, (&x - &me.estimate_post).norm_squared());
                }
                out.recorded_steps += 1;
                out.scheduled += scheduled.iter().filter(|&&s| s).count() as u64;
                out.transmissions += transmitting.len() as u64;
                out.deliveries += gamma as u64;
                out.collisions += collision as u64;
                out.feedback_losses += lost;
                let after = cg.tag.sensor * cfg.depth + cg.tag.hops.min(cfg.depth - 1);
                out.occupancy[after] += 1;
                out.boundary_visits += (cg.tag.hops + 1 >= cfg.depth) as u64;
                for m in 0..m_count {
                    link_hits[m] += link[m] as u64;
                }
            }

            // Re-centre on x_k so unstable plants stay finite. Every
            // estimator is shift-equivariant, so errors are unchanged.
            let ad = a * &x;
            for p in post.iter_mut() {
                *p -= &x;
            }
            cg.estimate -= &x;
            if let Some(o) = opt.as_mut() {
                o.estimate_post -= &x;
                o.estimate -= &ad;
            }
            if let Some(me) = meas.as_mut() {
                me.estimate_post -= &x;
                me.estimate -= &ad;
            }
            for m in 0..m_count {
                prior[m] = a * &post[m];
            }
            x = draw(&w_factor, &mut rng_plant);
            delivered_prev = gamma;
        }
        for b in [
            &mut energy,
            &mut cg_trace,
            &mut cg_err,
            &mut opt_trace,
            &mut opt_err,
            &mut meas_trace,
            &mut meas_err,
        ] {
            b.end_replication();
        }
    }

    out.avg_energy = energy.summary();
    out.constant_gain = EstimatorStats {
        trace: cg_trace.summary(),
        sq_error: cg_err.summary(),
    };
    if cfg.estimators.optimal {
        out.optimal = Some(EstimatorStats {
            trace: opt_trace.summary(),
            sq_error: opt_err.summary(),
        });
    }
    if cfg.estimators.measurement {
        out.measurement = Some(EstimatorStats {
            trace: meas_trace.summary(),
            sq_error: meas_err.summary(),
        });
    }
    let steps = out.recorded_steps.max(1) as f64;
    out.channel_success = link_hits.iter().map(|&h| h as f64 / steps).collect();
    Ok(out)
}

/// Baseline scheme with thresholds `T_m`.
pub fn run_baseline(cfg: &SimConfig, thresholds: &[f64]) -> Result<SimResult> {
    let mut cfg = cfg.clone();
    cfg.policy = PolicySource::Baseline(thresholds.to_vec());
    run_simulation(&cfg)
}
