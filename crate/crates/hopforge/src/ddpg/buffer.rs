//! Fixed-capacity FIFO experience replay with uniform sampling.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};

/// One environment interaction.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: DVector<f64>,
    pub action: DVector<f64>,
    pub reward: f64,
    pub next_state: DVector<f64>,
}

/// Ring buffer of transitions; once full, the oldest entry is evicted.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    /// Next write slot once the ring has wrapped.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be >= 1".into()));
        }
        Ok(Self { data: Vec::with_capacity(capacity.min(1 << 20)), capacity, head: 0 })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// `count` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<usize> {
        (0..count).map(|_| rng.gen_range(0..self.data.len())).collect()
    }

    /// Oldest-first iteration order of the logical FIFO.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.data.len() < self.capacity { 0 } else { self.head };
        self.data[split..].iter().chain(self.data[..split].iter())
    }
}
