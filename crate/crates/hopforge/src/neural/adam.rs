//! Bias-corrected Adam over a network's tensor list.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients};
use crate::error::{Error, Result};

/// Adam step-size and moment-decay coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First/second-moment estimates mirroring a network's parameters, plus the
/// shared step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    m_weights: Vec<DMatrix<f64>>,
    v_weights: Vec<DMatrix<f64>>,
    m_biases: Vec<DVector<f64>>,
    v_biases: Vec<DVector<f64>>,
    m_bn: Vec<Option<(DVector<f64>, DVector<f64>)>>,
    v_bn: Vec<Option<(DVector<f64>, DVector<f64>)>>,
}

impl AdamState {
    /// Zero moments shaped like `net`'s parameters.
    pub fn for_net(net: &DenseNet) -> Self {
        let zeros_like_m = |w: &DMatrix<f64>| DMatrix::zeros(w.nrows(), w.ncols());
        let zeros_like_v = |b: &DVector<f64>| DVector::zeros(b.len());
        Self {
            t: 0,
            m_weights: net.weights().iter().map(zeros_like_m).collect(),
            v_weights: net.weights().iter().map(zeros_like_m).collect(),
            m_biases: net.biases().iter().map(zeros_like_v).collect(),
            v_biases: net.biases().iter().map(zeros_like_v).collect(),
            m_bn: net
                .batchnorm()
                .iter()
                .map(|bn| {
                    bn.as_ref().map(|bn| (zeros_like_v(&bn.gamma), zeros_like_v(&bn.beta)))
                })
                .collect(),
            v_bn: net
                .batchnorm()
                .iter()
                .map(|bn| {
                    bn.as_ref().map(|bn| (zeros_like_v(&bn.gamma), zeros_like_v(&bn.beta)))
                })
                .collect(),
        }
    }

    fn tensor_slices_mut(&mut self, idx: usize, layers: usize) -> (&mut [f64], &mut [f64]) {
        if idx < layers {
            return (self.m_weights[idx].as_mut_slice(), self.v_weights[idx].as_mut_slice());
        }
        if idx < 2 * layers {
            let l = idx - layers;
            return (self.m_biases[l].as_mut_slice(), self.v_biases[l].as_mut_slice());
        }
        let mut rest = idx - 2 * layers;
        for (m, v) in self.m_bn.iter_mut().zip(self.v_bn.iter_mut()) {
            if let (Some(m), Some(v)) = (m.as_mut(), v.as_mut()) {
                if rest == 0 {
                    return (m.0.as_mut_slice(), v.0.as_mut_slice());
                }
                if rest == 1 {
                    return (m.1.as_mut_slice(), v.1.as_mut_slice());
                }
                rest -= 2;
            }
        }
        panic!("adam tensor index {idx} out of range");
    }
}

/// One bias-corrected Adam update on a flat parameter slice.
///
/// `t` is the post-increment step count (1 on the first call).
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    hyper: &AdamHyper,
) {
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grad[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

/// Applies one Adam step to every parameter of `net` using `grads`.
pub fn adam_step(
    net: &mut DenseNet,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    let count = net.tensor_count();
    let layers = net.num_layers();
    state.t += 1;
    let t = state.t;
    for idx in 0..count {
        let grad = grads.tensor_slice(idx);
        let param = net.tensor_slice_mut(idx);
        if grad.len() != param.len() {
            return Err(Error::DimensionMismatch(format!(
                "gradient tensor {idx} has {} entries, parameter has {}",
                grad.len(),
                param.len()
            )));
        }
        let (m, v) = state.tensor_slices_mut(idx, layers);
        adam_update(param, grad, m, v, t, hyper);
    }
    Ok(())
}
