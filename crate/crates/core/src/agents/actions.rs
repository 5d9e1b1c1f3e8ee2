use crate::dynamics::ThrustDelta;
use serde::{Deserialize, Serialize};

/// Per-propeller thrust-change levels, N/s.
pub const ACTION_LEVELS: [f64; 5] = [-1000.0, -500.0, 0.0, 500.0, 1000.0];
pub const NUM_DISCRETE_ACTIONS: usize = ACTION_LEVELS.len() * ACTION_LEVELS.len();

/// Joint discrete action space: index `i` ↔ `(A[i / 5], A[i % 5])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiscreteActionTable;

impl DiscreteActionTable {
    pub fn len(&self) -> usize {
        NUM_DISCRETE_ACTIONS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self, index: usize) -> ThrustDelta {
        let n = ACTION_LEVELS.len();
        ThrustDelta::new(ACTION_LEVELS[index / n], ACTION_LEVELS[index % n])
    }

    pub fn index_of(&self, delta: ThrustDelta) -> Option<usize> {
        let left = ACTION_LEVELS.iter().position(|&a| a == delta.left)?;
        let right = ACTION_LEVELS.iter().position(|&a| a == delta.right)?;
        Some(left * ACTION_LEVELS.len() + right)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ThrustDelta)> + '_ {
        (0..NUM_DISCRETE_ACTIONS).map(|i| (i, self.delta(i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continuous([f64; 2]),
    Discrete(usize),
}

impl Action {
    pub fn delta(&self) -> ThrustDelta {
        match *self {
            Action::Continuous([l, r]) => ThrustDelta::new(l, r).clipped(),
            Action::Discrete(i) => DiscreteActionTable.delta(i),
        }
    }

    pub fn discrete_index(&self) -> Option<usize> {
        match *self {
            Action::Discrete(i) => Some(i),
            Action::Continuous(_) => None,
        }
    }
}
