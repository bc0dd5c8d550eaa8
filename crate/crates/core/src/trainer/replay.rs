use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mat;

/// One environment transition. `prev_action` is the executed action that
/// preceded `action`, since the policy conditions on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Column-stacked view of sampled transitions.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Mat,
    pub prev_actions: Mat,
    pub actions: Mat,
    pub rewards: Vec<f64>,
    pub next_states: Mat,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty batch".into()))?;
        let stack = |f: &dyn Fn(&Transition) -> &Vec<f64>, width: usize| -> Result<Mat> {
            let mut data = Vec::with_capacity(items.len() * width);
            for t in items {
                let row = f(t);
                if row.len() != width {
                    return Err(Error::dims("batch row", width, row.len()));
                }
                data.extend_from_slice(row);
            }
            Mat::from_vec(items.len(), width, data)
        };
        Ok(Batch {
            states: stack(&|t| &t.state, first.state.len())?,
            prev_actions: stack(&|t| &t.prev_action, first.prev_action.len())?,
            actions: stack(&|t| &t.action, first.action.len())?,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: stack(&|t| &t.next_state, first.next_state.len())?,
            dones: items.iter().map(|t| t.done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 20)),
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = t;
        }
        self.inserted += 1;
    }

    /// Uniform sample of `n` distinct transitions (fewer if the buffer is
    /// smaller).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
