//! The covariance state space `{f^n(P̄_m)}` and its truncation at depth `N`.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, PsdOrder, PSD_TOLERANCE};
use crate::localfilter::{steady_state_all, SteadyStateFilter};
use crate::model::{f_map, SensorModel, SystemModel};
use crate::scheduler::Action;

/// Position of a covariance in the state space: `f^hops(P̄_sensor)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateTag {
    /// 0-based sensor index.
    pub sensor: usize,
    pub hops: usize,
}

impl StateTag {
    pub fn new(sensor: usize, hops: usize) -> Self {
        Self { sensor, hops }
    }
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.sensor + 1, self.hops)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovState {
    pub tag: StateTag,
    pub matrix: Matrix,
    pub trace: f64,
}

/// Result of one covariance transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub next: usize,
    /// The move would have left the truncated space and was folded onto the
    /// top state instead.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    model: SystemModel,
    filters: Vec<SteadyStateFilter>,
    depth: usize,
    states: Vec<CovState>,
    /// `tr f(X)` for every state `X`.
    predicted_traces: Vec<f64>,
    /// Row-major `order[i * len + j]` = order of state `i` relative to `j`.
    order: Vec<PsdOrder>,
}

/// Builds the truncated state space with `depth` states per sensor.
pub fn build_state_space(
    model: &SystemModel,
    sensors: &[SensorModel],
    depth: usize,
) -> Result<StateSpace> {
    if sensors.is_empty() {
        return Err(Error::invalid("sensors", "at least one sensor is required"));
    }
    let filters = steady_state_all(model, sensors)?;
    StateSpace::from_filters(model, filters, depth)
}

/// Smallest depth `>= min_depth` (and `<= max_depth`) at which the tops of
/// all sensor chains agree to `tol * max(1, max|entry|)`. Below that depth a
/// stable plant can leave several self-looping tops with slightly different
/// costs, which splits the idle chain into separate recurrent classes. For
/// one sensor or an unstable plant this is `min_depth`.
pub fn settled_depth(
    model: &SystemModel,
    sensors: &[SensorModel],
    min_depth: usize,
    max_depth: usize,
    tol: f64,
) -> Result<usize> {
    if sensors.len() < 2 || !model.is_stable() {
        return Ok(min_depth);
    }
    let filters = steady_state_all(model, sensors)?;
    let mut tops: Vec<Matrix> = filters.iter().map(|f| f.post_cov.clone()).collect();
    for depth in 1..=max_depth.max(min_depth) {
        if depth >= min_depth {
            let scale = tops.iter().map(linalg::max_abs).fold(1.0, f64::max);
            let spread = tops
                .iter()
                .skip(1)
                .map(|t| linalg::max_abs(&(t - &tops[0])))
                .fold(0.0, f64::max);
            if spread <= tol * scale {
                return Ok(depth);
            }
        }
        for t in tops.iter_mut() {
            *t = f_map(t, model)?;
        }
    }
    Ok(max_depth.max(min_depth))
}

impl StateSpace {
    pub fn from_filters(
        model: &SystemModel,
        filters: Vec<SteadyStateFilter>,
        depth: usize,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("depth", "must be at least 1"));
        }
        if filters.is_empty() {
            return Err(Error::invalid("sensors", "at least one sensor is required"));
        }
        let mut states = Vec::with_capacity(depth * filters.len());
        let mut predicted_traces = Vec::with_capacity(depth * filters.len());
        for (m, filter) in filters.iter().enumerate() {
            linalg::check_square("P̄", &filter.post_cov, model.dim())?;
            let mut x = filter.post_cov.clone();
            for n in 0..depth {
                let next = f_map(&x, model)?;
                predicted_traces.push(next.trace());
                states.push(CovState {
                    tag: StateTag::new(m, n),
                    trace: x.trace(),
                    matrix: x,
                });
                x = next;
            }
        }
        let len = states.len();
        let mut order = alloc::vec![PsdOrder::Equal; len * len];
        for i in 0..len {
            for j in (i + 1)..len {
                let o = linalg::psd_compare(&states[i].matrix, &states[j].matrix, PSD_TOLERANCE);
                order[i * len + j] = o;
                order[j * len + i] = o.reverse();
            }
        }
        Ok(Self {
            model: model.clone(),
            filters,
            depth,
            states,
            predicted_traces,
            order,
        })
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn filters(&self) -> &[SteadyStateFilter] {
        &self.filters
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sensors(&self) -> usize {
        self.filters.len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[CovState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &CovState {
        &self.states[index]
    }

    pub fn index(&self, tag: StateTag) -> Option<usize> {
        (tag.sensor < self.sensors() && tag.hops < self.depth)
            .then(|| tag.sensor * self.depth + tag.hops)
    }

    pub fn tag(&self, index: usize) -> StateTag {
        self.states[index].tag
    }

    /// Index of `P̄_m`.
    pub fn root(&self, sensor: usize) -> usize {
        sensor * self.depth
    }

    pub fn is_top(&self, index: usize) -> bool {
        self.states[index].tag.hops + 1 == self.depth
    }

    /// `tr P̄_m`.
    pub fn post_trace(&self, sensor: usize) -> f64 {
        self.states[self.root(sensor)].trace
    }

    /// `tr f(X)` for state `X`, exact even at the top of the truncation.
    pub fn predicted_trace(&self, index: usize) -> f64 {
        self.predicted_traces[index]
    }

    pub fn order(&self, i: usize, j: usize) -> PsdOrder {
        self.order[i * self.len() + j]
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        self.order(i, j) != PsdOrder::Incomparable
    }

    /// Every pair of states is comparable.
    pub fn is_totally_ordered(&self) -> bool {
        self.order.iter().all(|&o| o != PsdOrder::Incomparable)
    }

    pub fn incomparable_pairs(&self) -> usize {
        self.order
            .iter()
            .filter(|&&o| o == PsdOrder::Incomparable)
            .count()
            / 2
    }

    /// State indices in nondecreasing order, when the space is totally
    /// ordered. Ties keep their index order.
    pub fn sorted_chain(&self) -> Option<Vec<usize>> {
        if !self.is_totally_ordered() {
            return None;
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.states[a]
                .trace
                .partial_cmp(&self.states[b].trace)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Some(idx)
    }

    /// Where the covariance goes from `index` after `action`, given whether
    /// a scheduled packet arrived.
    pub fn transition(&self, index: usize, action: Action, success: bool) -> Transition {
        match action {
            Action::Transmit(m) if success => Transition {
                next: self.root(m),
                truncated: false,
            },
            _ if self.is_top(index) => Transition {
                next: index,
                truncated: true,
            },
            _ => Transition {
                next: index + 1,
                truncated: false,
            },
        }
    }

    /// Pairs `(n, eigmin)` along each sensor's chain where
    /// `f^{n+1}(P̄_m) - f^n(P̄_m)` fails to be PSD.
    pub fn chain_order_violations(&self) -> Vec<(StateTag, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            if self.is_top(i) {
                continue;
            }
            let diff = &self.states[i + 1].matrix - &self.states[i].matrix;
            let lo = linalg::min_eigenvalue(&diff);
            if lo < -PSD_TOLERANCE * linalg::max_abs(&self.states[i + 1].matrix).max(1.0) {
                out.push((self.states[i].tag, lo));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;

    fn single() -> StateSpace {
        let m = SystemModel::new(mat(&[&[1.1, 0.2], &[0.2, 0.8]]), Matrix::identity(2, 2)).unwrap();
        let s = SensorModel::new(mat(&[&[1.0, 1.0]]), linalg::scalar(1.0), 0.8, 1.0).unwrap();
        build_state_space(&m, &[s], 6).unwrap()
    }

    #[test]
    fn transitions() {
        let sp = single();
        let t = sp.transition(2, Action::Idle, true);
        assert_eq!((t.next, t.truncated), (3, false));
        let t = sp.transition(5, Action::Idle, false);
        assert_eq!((t.next, t.truncated), (5, true));
        let t = sp.transition(4, Action::Transmit(0), true);
        assert_eq!((t.next, t.truncated), (0, false));
        let t = sp.transition(4, Action::Transmit(0), false);
        assert_eq!(t.next, 5);
    }

    #[test]
    fn single_sensor_chain_is_ordered() {
        let sp = single();
        assert!(sp.chain_order_violations().is_empty());
        assert!(sp.is_totally_ordered());
        assert_eq!(sp.sorted_chain().unwrap(), (0..6).collect::<Vec<_>>());
        for i in 0..5 {
            assert_eq!(sp.order(i, i + 1), PsdOrder::Less);
            assert!((sp.predicted_trace(i) - sp.state(i + 1).trace).abs() < 1e-12);
        }
    }

    #[test]
    fn indexing() {
        let sp = single();
        assert_eq!(sp.index(StateTag::new(0, 3)), Some(3));
        assert_eq!(sp.index(StateTag::new(0, 6)), None);
        assert_eq!(sp.index(StateTag::new(1, 0)), None);
        assert_eq!(sp.tag(4), StateTag::new(0, 4));
        assert_eq!(StateTag::new(0, 4).to_string(), "(1, 4)");
    }
}
