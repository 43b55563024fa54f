//! Fixed-capacity ring buffer of executed transitions.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envs::DoneReason;
use crate::error::{contract, ensure_dim, Error, Result};
use crate::rng::Stream;

pub const DEFAULT_CAPACITY: usize = 200_000;

/// One environment step. `action` is what was executed, after mixing,
/// noise and clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: bool,
    pub done_reason: DoneReason,
}

impl Transition {
    /// Whether the TD target may bootstrap from `next_observation`.
    /// Time-limit truncation is not absorbing; any other `done` is.
    pub fn bootstraps(&self) -> bool {
        !self.done || self.done_reason == DoneReason::TimeLimit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    insert_count: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(contract!("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            obs_dim,
            action_dim,
            storage: Vec::new(),
            insert_count: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        ensure_dim("transition observation", self.obs_dim, t.observation.len())?;
        ensure_dim("transition next observation", self.obs_dim, t.next_observation.len())?;
        ensure_dim("transition action", self.action_dim, t.action.len())?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            let slot = (self.insert_count % self.capacity as u64) as usize;
            self.storage[slot] = t;
        }
        self.insert_count += 1;
        Ok(())
    }

    /// Uniform sampling with replacement, so `batch_size` may exceed the
    /// number of stored transitions. Fails only on an empty buffer.
    pub fn sample(&self, batch_size: usize, rng: &mut Stream) -> Result<Vec<&Transition>> {
        if batch_size == 0 {
            return Err(contract!("batch size must be positive"));
        }
        if self.storage.is_empty() {
            return Err(Error::InsufficientSamples {
                available: self.storage.len(),
                requested: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.storage[rng.below(self.storage.len())])
            .collect())
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            (self.insert_count % self.capacity as u64) as usize
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// Raw slot order, as needed to restore the buffer bit-for-bit.
    pub fn slots(&self) -> &[Transition] {
        &self.storage
    }

    pub fn from_slots(
        capacity: usize,
        obs_dim: usize,
        action_dim: usize,
        slots: Vec<Transition>,
        insert_count: u64,
    ) -> Result<Self> {
        let mut buf = Self::new(capacity, obs_dim, action_dim)?;
        let expected = insert_count.min(capacity as u64) as usize;
        ensure_dim("restored replay slots", expected, slots.len())?;
        for t in &slots {
            ensure_dim("transition observation", obs_dim, t.observation.len())?;
            ensure_dim("transition action", action_dim, t.action.len())?;
        }
        buf.storage = slots;
        buf.insert_count = insert_count;
        Ok(buf)
    }
}
