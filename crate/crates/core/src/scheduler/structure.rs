use alloc::vec::Vec;

use super::{iid_mdp, Action, FiniteSolution};
use crate::error::{Error, Result};
use crate::linalg::PsdOrder;
use crate::model::SensorModel;
use crate::statespace::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureOptions {
    /// Relative slack; a gap counts only beyond `slack * max(1, |a|, |b|)`.
    pub slack: f64,
    /// Skip states within this many hops of the truncation top.
    pub boundary_margin: usize,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self {
            slack: 1e-9,
            boundary_margin: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `V(lower) > V(upper)` although `lower <= upper`.
    Value {
        stage: Option<usize>,
        lower: usize,
        upper: usize,
        excess: f64,
    },
    /// `phi_m` decreased between comparable states.
    Phi {
        stage: Option<usize>,
        sensor: usize,
        lower: usize,
        upper: usize,
        excess: f64,
    },
    /// Sensor `first` overtook `second` at `states[1]` after trailing at
    /// `states[0]`, but fell behind again at `states[2]`.
    Psi {
        stage: Option<usize>,
        first: usize,
        second: usize,
        states: [usize; 3],
        excess: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructureReport {
    pub violations: Vec<Violation>,
    /// Comparable ordered pairs examined per stage.
    pub pairs_checked: usize,
}

impl StructureReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn value_violations(&self) -> usize {
        self.count(|v| matches!(v, Violation::Value { .. }))
    }

    pub fn phi_violations(&self) -> usize {
        self.count(|v| matches!(v, Violation::Phi { .. }))
    }

    pub fn psi_violations(&self) -> usize {
        self.count(|v| matches!(v, Violation::Psi { .. }))
    }

    fn count(&self, pred: impl Fn(&Violation) -> bool) -> usize {
        self.violations.iter().filter(|v| pred(v)).count()
    }

    fn merge(&mut self, other: StructureReport) {
        self.violations.extend(other.violations);
        self.pairs_checked += other.pairs_checked;
    }
}

/// Checks an average-cost relative value function `h`: monotone `h`,
/// increasing `phi_m`, and persistence of `psi` crossings.
pub fn verify_structure(
    values: &[f64],
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
) -> Result<StructureReport> {
    verify_structure_with(values, values, None, space, sensors, beta, &StructureOptions::default())
}

/// Checks every stage of a finite-horizon solution, using `J_k` for the
/// monotonicity test and `J_{k+1}` inside `phi` and `psi`.
pub fn verify_finite_structure(
    solution: &FiniteSolution,
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
) -> Result<StructureReport> {
    let zero = alloc::vec![0.0; space.len()];
    let mut report = StructureReport::default();
    for k in 1..=solution.policy.horizon {
        let values = solution.value(k).unwrap_or(&zero);
        let next = solution.value(k + 1).unwrap_or(&zero);
        report.merge(verify_structure_with(
            values,
            next,
            Some(k),
            space,
            sensors,
            beta,
            &StructureOptions::default(),
        )?);
    }
    Ok(report)
}

/// Largest subrelation of the PSD order that is closed under the idle
/// successor, i.e. `i <= j` implies `s(i) <= s(j)`. The truncation top
/// self-loops, so a state just below one chain's top can step past another
/// chain's top; such pairs carry no ordering argument and are left out.
pub fn truncated_order(space: &StateSpace) -> Vec<bool> {
    let n = space.len();
    let next: Vec<usize> = (0..n).map(|i| space.transition(i, Action::Idle, false).next).collect();
    let mut rel: Vec<bool> = (0..n * n)
        .map(|k| matches!(space.order(k / n, k % n), PsdOrder::Less | PsdOrder::Equal))
        .collect();
    loop {
        let mut changed = false;
        for k in 0..n * n {
            if rel[k] && !rel[next[k / n] * n + next[k % n]] {
                rel[k] = false;
                changed = true;
            }
        }
        if !changed {
            return rel;
        }
    }
}

/// General form: `values` is tested for monotonicity and `continuation`
/// enters the action values.
pub fn verify_structure_with(
    values: &[f64],
    continuation: &[f64],
    stage: Option<usize>,
    space: &StateSpace,
    sensors: &[SensorModel],
    beta: f64,
    opts: &StructureOptions,
) -> Result<StructureReport> {
    let n = space.len();
    if values.len() != n || continuation.len() != n {
        return Err(Error::DimensionMismatch {
            context: "value function",
            expected: (n, 1),
            found: (values.len().min(continuation.len()), 1),
        });
    }
    let mdp = iid_mdp(space, sensors, beta)?;
    let m_count = space.sensors();
    let q = |i: usize, c: usize| {
        let ch = &mdp.choices[i][c];
        ch.cost + ch.transitions.iter().map(|&(j, p)| p * continuation[j]).sum::<f64>()
    };
    // psi[i][c]: value of choice c (0 idle, m + 1 sensor m) at state i
    let psi: Vec<Vec<f64>> = (0..n).map(|i| (0..=m_count).map(|c| q(i, c)).collect()).collect();
    let slack = |a: f64, b: f64| opts.slack * a.abs().max(b.abs()).max(1.0);

    let keep: Vec<bool> = (0..n)
        .map(|i| space.tag(i).hops + opts.boundary_margin < space.depth())
        .collect();
    // matrices equal within the order tolerance are ties with no direction
    let rel = truncated_order(space);
    let le = |i: usize, j: usize| rel[i * n + j] && space.order(i, j) != PsdOrder::Equal;

    let mut report = StructureReport::default();
    for i in (0..n).filter(|&i| keep[i]) {
        for j in (0..n).filter(|&j| keep[j] && j != i && le(i, j)) {
            report.pairs_checked += 1;
            if values[i] > values[j] + slack(values[i], values[j]) {
                report.violations.push(Violation::Value {
                    stage,
                    lower: i,
                    upper: j,
                    excess: values[i] - values[j],
                });
            }
            for m in 0..m_count {
                let lo = psi[i][0] - psi[i][m + 1];
                let hi = psi[j][0] - psi[j][m + 1];
                let tol = slack(psi[i][0], psi[j][0]).max(slack(psi[i][m + 1], psi[j][m + 1]));
                if lo > hi + tol {
                    report.violations.push(Violation::Phi {
                        stage,
                        sensor: m,
                        lower: i,
                        upper: j,
                        excess: lo - hi,
                    });
                }
            }
        }
    }

    for a in 0..m_count {
        for b in (0..m_count).filter(|&b| b != a) {
            // d = psi_a - psi_b; here "a overtakes b" means psi_a >= psi_b
            let d = |i: usize| psi[i][a + 1] - psi[i][b + 1];
            for mid in (0..n).filter(|&j| keep[j] && d(j) >= 0.0) {
                let Some(low) = (0..n).find(|&i| keep[i] && le(i, mid) && d(i) <= 0.0) else {
                    continue;
                };
                for high in (0..n).filter(|&k| keep[k] && k != mid && le(mid, k)) {
                    let tol = slack(psi[high][a + 1], psi[high][b + 1]);
                    if d(high) < -tol {
                        report.violations.push(Violation::Psi {
                            stage,
                            first: a,
                            second: b,
                            states: [low, mid, high],
                            excess: -d(high),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}
