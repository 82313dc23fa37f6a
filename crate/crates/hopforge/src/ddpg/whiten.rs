//! Streaming per-dimension whitening of network inputs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Welford-style running mean and (population) variance per dimension.
///
/// After observing n states the stored statistics equal the batch mean and
/// variance of exactly those n states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunningWhitener {
    count: u64,
    mean: DVector<f64>,
    /// Sum of squared deviations from the running mean.
    m2: DVector<f64>,
    epsilon: f64,
}

impl RunningWhitener {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: DVector::zeros(dim), m2: DVector::zeros(dim), epsilon: 1e-8 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn observe(&mut self, x: &DVector<f64>) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            let delta2 = x[i] - self.mean[i];
            self.m2[i] += delta * delta2;
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Population variance of everything observed so far.
    pub fn variance(&self) -> DVector<f64> {
        if self.count == 0 {
            return DVector::zeros(self.mean.len());
        }
        self.m2.map(|v| v / self.count as f64)
    }

    /// `(x - mean) / sqrt(var + eps)` per dimension.
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        let var = self.variance();
        DVector::from_fn(x.len(), |i, _| (x[i] - self.mean[i]) / (var[i] + self.epsilon).sqrt())
    }
}
