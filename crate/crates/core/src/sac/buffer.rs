use rand::Rng;

use crate::staterep::Transition;
use crate::{Error, Result};

/// A sampled mini-batch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(tuples: &[&Transition]) -> Result<Self> {
        let first = tuples
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (ds, da) = (first.state.len(), first.action.len());
        let mut batch = Self {
            size: tuples.len(),
            state_dim: ds,
            action_dim: da,
            states: Vec::with_capacity(tuples.len() * ds),
            actions: Vec::with_capacity(tuples.len() * da),
            rewards: Vec::with_capacity(tuples.len()),
            next_states: Vec::with_capacity(tuples.len() * ds),
            dones: Vec::with_capacity(tuples.len()),
        };
        for t in tuples {
            if t.state.len() != ds || t.next_state.len() != ds || t.action.len() != da {
                return Err(Error::shape("transition", &[ds, da], &[t.state.len(), t.action.len()]));
            }
            batch.states.extend_from_slice(&t.state);
            batch.actions.extend_from_slice(&t.action);
            batch.rewards.push(t.reward);
            batch.next_states.extend_from_slice(&t.next_state);
            batch.dones.push(t.done);
        }
        Ok(batch)
    }
}

/// Fixed-capacity ring buffer of representation-space transitions with
/// uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    next: usize,
    items: Vec<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            next: 0,
            items: Vec::new(),
        }
    }

    /// Buffer holding exactly `tuples` (capacity = their count).
    pub fn from_transitions(tuples: Vec<Transition>) -> Self {
        let capacity = tuples.len().max(1);
        Self {
            capacity,
            next: 0,
            items: tuples,
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(Error::InsufficientData {
                stored: self.items.len(),
                requested: batch_size,
            });
        }
        let picks: Vec<&Transition> = (0..batch_size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect();
        Batch::from_transitions(&picks)
    }
}
