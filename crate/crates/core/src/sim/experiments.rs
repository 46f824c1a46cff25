//! Comparison experiments built on [`run_simulation`].

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{run_simulation, Estimators, PolicySource, Seeds, SimConfig, Stat};
use crate::error::Result;
use crate::instances::{random_comparison_draw, Instance};
use crate::scheduler::{solve_infinite_horizon, RviOptions};
use crate::statespace::build_state_space;

/// Long-run average `tr P_{k|k}` of the three remote estimators on one
/// random draw.
#[derive(Debug, Clone)]
pub struct Table1Row {
    pub instance: Instance,
    pub optimal: Stat,
    pub suboptimal: Stat,
    pub measurement: Stat,
}

impl Table1Row {
    /// `optimal <= suboptimal + k * se`, with the two standard errors
    /// combined in quadrature.
    pub fn optimal_within(&self, k: f64) -> bool {
        let se = libm::hypot(self.optimal.std_error, self.suboptimal.std_error);
        self.optimal.mean <= self.suboptimal.mean + k * se
    }
}

/// Random draws with uniformly random single-sensor scheduling. Parameters
/// and per-draw simulation seeds come from one ChaCha20 stream keyed by
/// `master`.
pub fn table1_protocol(master: u64, draws: usize, steps: usize) -> Result<Vec<Table1Row>> {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    let mut rows = Vec::with_capacity(draws);
    for _ in 0..draws {
        let instance = random_comparison_draw(&mut rng);
        let seed = rng.next_u64();
        let mut cfg = SimConfig::new(
            instance.model.clone(),
            instance.sensors.clone(),
            PolicySource::RandomSingle,
        );
        cfg.steps = steps;
        cfg.seeds = Seeds::from_master(seed);
        cfg.estimators = Estimators {
            optimal: true,
            measurement: true,
        };
        let out = run_simulation(&cfg)?;
        rows.push(Table1Row {
            instance,
            optimal: out.optimal.map(|s| s.trace).expect("optimal estimator enabled"),
            suboptimal: out.constant_gain.trace,
            measurement: out.measurement.map(|s| s.trace).expect("measurement estimator enabled"),
        });
    }
    Ok(rows)
}

/// One point of an energy-covariance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Threshold `T` or weight `beta`.
    pub parameter: f64,
    pub energy: f64,
    /// Empirical mean squared error of the constant-gain estimate.
    pub covariance: f64,
}

/// Baseline scheme with `T_m = T` for every sensor, one point per `T`.
pub fn baseline_sweep(template: &SimConfig, thresholds: &[f64]) -> Result<Vec<CurvePoint>> {
    thresholds
        .iter()
        .map(|&t| {
            let mut cfg = template.clone();
            cfg.policy = PolicySource::Baseline(alloc::vec![t; cfg.sensors.len()]);
            let out = run_simulation(&cfg)?;
            Ok(CurvePoint {
                parameter: t,
                energy: out.avg_energy.mean,
                covariance: out.constant_gain.sq_error.mean,
            })
        })
        .collect()
}

/// Average-cost optimal policies over `betas`, each simulated with the
/// template's seeds.
pub fn dp_tradeoff(template: &SimConfig, betas: &[f64], opts: &RviOptions) -> Result<Vec<CurvePoint>> {
    let space = build_state_space(&template.model, &template.sensors, template.depth)?;
    betas
        .iter()
        .map(|&beta| {
            let sol = solve_infinite_horizon(&space, &template.sensors, beta, opts)?;
            let mut cfg = template.clone();
            cfg.policy = PolicySource::Stationary(sol.policy.actions);
            let out = run_simulation(&cfg)?;
            Ok(CurvePoint {
                parameter: beta,
                energy: out.avg_energy.mean,
                covariance: out.constant_gain.sq_error.mean,
            })
        })
        .collect()
}

/// Low-covariance end of the two curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    /// Lowest-covariance baseline point.
    pub baseline: CurvePoint,
    /// Lower convex hull of the DP points at the baseline energy, reachable
    /// by time sharing between two stationary policies.
    pub dp_covariance: f64,
    /// DP points spanning that hull segment; equal when one point suffices.
    pub dp_points: (CurvePoint, CurvePoint),
}

impl Dominance {
    pub fn holds(&self) -> bool {
        self.dp_covariance < self.baseline.covariance
    }
}

/// Evaluates the DP curve at the energy of the best baseline point. `None`
/// when either curve is empty or every DP point spends more energy.
pub fn low_covariance_dominance(dp: &[CurvePoint], baseline: &[CurvePoint]) -> Option<Dominance> {
    let best = baseline
        .iter()
        .copied()
        .min_by(|a, b| a.covariance.total_cmp(&b.covariance))?;
    let e = best.energy;
    let mut out: Option<(f64, CurvePoint, CurvePoint)> = None;
    let mut offer = |v: f64, p: CurvePoint, q: CurvePoint| {
        if out.map_or(true, |(w, _, _)| v < w) {
            out = Some((v, p, q));
        }
    };
    for &p in dp.iter().filter(|p| p.energy <= e) {
        offer(p.covariance, p, p);
        for &q in dp.iter().filter(|q| q.energy > e) {
            let w = (e - p.energy) / (q.energy - p.energy);
            offer(p.covariance + w * (q.covariance - p.covariance), p, q);
        }
    }
    let (dp_covariance, p, q) = out?;
    Some(Dominance {
        baseline: best,
        dp_covariance,
        dp_points: (p, q),
    })
}
