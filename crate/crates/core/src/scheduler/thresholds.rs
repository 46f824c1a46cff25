use alloc::vec::Vec;

use super::Action;
use crate::statespace::StateSpace;

/// A maximal run of one action along the ordered chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub action: Action,
    /// Position of the first state of the run in the ordered chain.
    pub start: usize,
    /// State index of that first state.
    pub state: usize,
    /// Its covariance trace.
    pub trace: f64,
}

/// Two-sensor classification along a totally ordered chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Idle, then sensor 1 only.
    OnlyFirst,
    /// Idle, then sensor 2 only.
    OnlySecond,
    /// Idle, then sensor 2, then sensor 1.
    SecondThenFirst,
    /// Idle, then sensor 1, then sensor 2.
    FirstThenSecond,
}

impl Scenario {
    /// Roman numeral label, `"i"` to `"iv"`.
    pub fn label(self) -> &'static str {
        match self {
            Scenario::OnlyFirst => "i",
            Scenario::OnlySecond => "ii",
            Scenario::SecondThenFirst => "iii",
            Scenario::FirstThenSecond => "iv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdShape {
    /// The state space has incomparable pairs; nothing to extract.
    NotTotallyOrdered,
    /// Idle (possibly empty) followed by one contiguous run per sensor.
    Banded(Vec<Band>),
    /// Actions along the ordered chain that fit no banded form.
    Violation(Vec<Action>),
}

impl ThresholdShape {
    pub fn is_banded(&self) -> bool {
        matches!(self, ThresholdShape::Banded(_))
    }

    pub fn bands(&self) -> &[Band] {
        match self {
            ThresholdShape::Banded(b) => b,
            _ => &[],
        }
    }

    /// Chain position where transmission starts; `Some(len)` when the
    /// policy never transmits.
    pub fn first_transmit(&self, chain_len: usize) -> Option<usize> {
        match self {
            ThresholdShape::Banded(b) => Some(
                b.iter()
                    .find(|band| band.action != Action::Idle)
                    .map_or(chain_len, |band| band.start),
            ),
            _ => None,
        }
    }

    /// First band of sensor `m`.
    pub fn threshold(&self, sensor: usize) -> Option<Band> {
        self.bands()
            .iter()
            .find(|b| b.action == Action::Transmit(sensor))
            .copied()
    }

    /// Classification of a two-sensor policy. `None` when the shape
    /// is not banded, the policy never transmits, or more than two sensors
    /// appear.
    pub fn scenario(&self) -> Option<Scenario> {
        let order: Vec<usize> = self.bands().iter().filter_map(|b| b.action.sensor()).collect();
        match order.as_slice() {
            [0] => Some(Scenario::OnlyFirst),
            [1] => Some(Scenario::OnlySecond),
            [1, 0] => Some(Scenario::SecondThenFirst),
            [0, 1] => Some(Scenario::FirstThenSecond),
            _ => None,
        }
    }
}

/// Reads a stationary decision table along the ordered chain of `space`.
pub fn extract_thresholds(actions: &[Action], space: &StateSpace) -> ThresholdShape {
    let Some(chain) = space.sorted_chain() else {
        return ThresholdShape::NotTotallyOrdered;
    };
    let along: Vec<Action> = chain.iter().map(|&i| actions[i]).collect();
    let mut bands: Vec<Band> = Vec::new();
    for (pos, (&state, &action)) in chain.iter().zip(&along).enumerate() {
        if bands.last().map(|b| b.action) == Some(action) {
            continue;
        }
        let repeated = bands.iter().any(|b| b.action == action);
        let idle_late = action == Action::Idle && !bands.is_empty();
        if repeated || idle_late {
            return ThresholdShape::Violation(along);
        }
        bands.push(Band {
            action,
            start: pos,
            state,
            trace: space.state(state).trace,
        });
    }
    ThresholdShape::Banded(bands)
}
