//! Self-contained dense network stack: linear layers, optional per-hidden-
//! layer batch normalization, ReLU/tanh activations, exact reverse-mode
//! backpropagation, Adam, and a finite-difference gradient checker.
//!
//! Batches are column-major: a batch matrix has one feature per row and one
//! sample per column. Backward returns gradients for every parameter *and*
//! for the network input; the input gradient is what lets the actor update
//! chain through the critic.

mod adam;
mod checkpoint;
mod gradcheck;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use checkpoint::{load_net, save_net, NetCheckpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, min_relu_input_magnitude, GradCheckReport};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::Tanh => x.map(f64::tanh),
            Activation::Identity => x.clone(),
        }
    }

    /// Derivative expressed through the activation *output*.
    fn backprop(&self, grad: &DMatrix<f64>, output: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Relu => grad.zip_map(output, |g, a| if a > 0.0 { g } else { 0.0 }),
            Activation::Tanh => grad.zip_map(output, |g, a| g * (1.0 - a * a)),
            Activation::Identity => grad.clone(),
        }
    }
}

/// Per-feature batch normalization state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    pub running_mean: DVector<f64>,
    pub running_var: DVector<f64>,
    /// Fraction of the fresh batch statistic blended into the running one.
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    fn new(width: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: DVector::from_element(width, 1.0),
            beta: DVector::zeros(width),
            running_mean: DVector::zeros(width),
            running_var: DVector::from_element(width, 1.0),
            momentum,
            epsilon,
        }
    }
}

/// How a forward pass treats batch-normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics without touching the running ones. Used when the
    /// pass exists only to produce gradients for *another* network.
    TrainFrozen,
    /// Running statistics; fully deterministic and batch-size independent.
    Eval,
}

/// Construction parameters for [`DenseNet::new`].
#[derive(Debug, Clone)]
pub struct NetConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    /// Insert a batch-normalization stage before each hidden activation.
    pub batchnorm: bool,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    /// When set, the output layer is initialized uniformly in
    /// `[-s, s]` instead of fan-in scaled. Small values keep early policy
    /// outputs near zero.
    pub output_init_scale: Option<f64>,
}

impl NetConfig {
    /// Two ReLU hidden layers of equal width, the stack's default shape.
    pub fn two_hidden(input: usize, width: usize, output: usize) -> Self {
        Self {
            input,
            hidden: vec![width, width],
            output,
            batchnorm: true,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            bn_momentum: 0.1,
            bn_epsilon: 1e-5,
            output_init_scale: None,
        }
    }
}

/// Fully connected network: dense layers with optional batch normalization
/// on the hidden stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    /// One slot per hidden layer (layer count minus one).
    batchnorm: Vec<Option<BatchNorm>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Cached intermediates of one forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DMatrix<f64>,
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Input to the activation (batch-norm output when present, else the
    /// affine preactivation).
    act_in: DMatrix<f64>,
    /// Activation output; the next layer's input.
    post: DMatrix<f64>,
    bn: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: DMatrix<f64>,
    /// `1 / sqrt(var + eps)` actually used for normalization.
    inv_std: DVector<f64>,
    /// Whether batch statistics were used (couples the backward pass).
    batch_stats: bool,
}

/// Parameter gradients plus the gradient w.r.t. the network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    /// `(d gamma, d beta)` per hidden layer with batch normalization.
    pub batchnorm: Vec<Option<(DVector<f64>, DVector<f64>)>>,
    pub input: DMatrix<f64>,
}

impl Gradients {
    /// Multiplies every parameter gradient (not the input gradient) by `s`.
    /// `scale(-1.0)` turns a descent direction into ascent.
    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            *w *= s;
        }
        for b in &mut self.biases {
            *b *= s;
        }
        for bn in self.batchnorm.iter_mut().flatten() {
            bn.0 *= s;
            bn.1 *= s;
        }
    }
}

impl DenseNet {
    /// Builds a network with fan-in-scaled uniform initialization.
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        if cfg.input == 0 || cfg.output == 0 || cfg.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        let mut dims = vec![cfg.input];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(cfg.output);

        let layers = dims.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let fan_in = dims[l];
            let fan_out = dims[l + 1];
            let limit = if l == layers - 1 {
                cfg.output_init_scale.unwrap_or_else(|| (6.0 / fan_in as f64).sqrt())
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                (rng.gen::<f64>() * 2.0 - 1.0) * limit
            }));
            biases.push(DVector::zeros(fan_out));
        }
        let batchnorm = (0..layers - 1)
            .map(|l| {
                cfg.batchnorm.then(|| BatchNorm::new(dims[l + 1], cfg.bn_momentum, cfg.bn_epsilon))
            })
            .collect();
        Ok(Self {
            weights,
            biases,
            batchnorm,
            hidden_activation: cfg.hidden_activation,
            output_activation: cfg.output_activation,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_width(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights[self.weights.len() - 1].nrows()
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn batchnorm(&self) -> &[Option<BatchNorm>] {
        &self.batchnorm
    }

    /// Forward pass over a `features x samples` batch.
    pub fn forward(&mut self, batch: &DMatrix<f64>, mode: Mode) -> Result<(DMatrix<f64>, ForwardCache)> {
        if batch.nrows() != self.input_width() {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} features, network expects {}",
                batch.nrows(),
                self.input_width()
            )));
        }
        if batch.ncols() == 0 {
            return Err(Error::InvalidArgument("batch must contain at least one sample".into()));
        }
        let layers = self.num_layers();
        let mut caches = Vec::with_capacity(layers);
        let mut x = batch.clone();
        for l in 0..layers {
            let mut z = &self.weights[l] * &x;
            for mut col in z.column_iter_mut() {
                col += &self.biases[l];
            }
            let last = l == layers - 1;
            let (act_in, bn_cache) = if !last {
                match &mut self.batchnorm[l] {
                    Some(bn) => {
                        let (y, cache) = bn_forward(bn, &z, mode);
                        (y, Some(cache))
                    }
                    None => (z, None),
                }
            } else {
                (z, None)
            };
            let act = if last { self.output_activation } else { self.hidden_activation };
            let post = act.apply(&act_in);
            caches.push(LayerCache { act_in, post: post.clone(), bn: bn_cache });
            x = post;
        }
        let out = x;
        Ok((out.clone(), ForwardCache { input: batch.clone(), layers: caches }))
    }

    /// Convenience single-sample eval-mode pass.
    pub fn infer(&mut self, input: &DVector<f64>) -> Result<DVector<f64>> {
        let batch = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
        let (out, _) = self.forward(&batch, Mode::Eval)?;
        Ok(out.column(0).into_owned())
    }

    /// Exact reverse-mode gradients of the scalar loss whose output
    /// derivative is `upstream` (same shape as the forward output).
    pub fn backward(&self, cache: &ForwardCache, upstream: &DMatrix<f64>) -> Result<Gradients> {
        let layers = self.num_layers();
        if cache.layers.len() != layers || cache.input.nrows() != self.input_width() {
            return Err(Error::DimensionMismatch(
                "forward cache does not match this network (stale cache?)".into(),
            ));
        }
        let last = &cache.layers[layers - 1];
        if upstream.shape() != last.post.shape() {
            return Err(Error::DimensionMismatch(format!(
                "upstream gradient is {:?}, output was {:?}",
                upstream.shape(),
                last.post.shape()
            )));
        }

        let mut grad_w = vec![DMatrix::zeros(0, 0); layers];
        let mut grad_b = vec![DVector::zeros(0); layers];
        let mut grad_bn: Vec<Option<(DVector<f64>, DVector<f64>)>> = vec![None; layers - 1];

        let mut g = upstream.clone();
        for l in (0..layers).rev() {
            let lc = &cache.layers[l];
            let act = if l == layers - 1 { self.output_activation } else { self.hidden_activation };
            let mut dz = act.backprop(&g, &lc.post);

            if l < layers - 1 {
                if let (Some(bn), Some(bc)) = (&self.batchnorm[l], &lc.bn) {
                    let (dgamma, dbeta, dx) = bn_backward(bn, bc, &dz);
                    grad_bn[l] = Some((dgamma, dbeta));
                    dz = dx;
                }
            }

            let x_prev: &DMatrix<f64> =
                if l == 0 { &cache.input } else { &cache.layers[l - 1].post };
            grad_w[l] = &dz * x_prev.transpose();
            grad_b[l] = DVector::from_fn(dz.nrows(), |r, _| dz.row(r).sum());
            g = self.weights[l].tr_mul(&dz);
        }

        Ok(Gradients { weights: grad_w, biases: grad_b, batchnorm: grad_bn, input: g })
    }

    /// Blends this network toward `src`: `self = tau * src + (1 - tau) * self`
    /// across every tensor, running statistics included. `tau = 1` is a hard
    /// copy.
    pub fn blend_from(&mut self, src: &DenseNet, tau: f64) {
        let blend_mat = |dst: &mut DMatrix<f64>, s: &DMatrix<f64>| {
            dst.zip_apply(s, |d, sv| *d = tau * sv + (1.0 - tau) * *d);
        };
        let blend_vec = |dst: &mut DVector<f64>, s: &DVector<f64>| {
            dst.zip_apply(s, |d, sv| *d = tau * sv + (1.0 - tau) * *d);
        };
        for (w, sw) in self.weights.iter_mut().zip(src.weights.iter()) {
            blend_mat(w, sw);
        }
        for (b, sb) in self.biases.iter_mut().zip(src.biases.iter()) {
            blend_vec(b, sb);
        }
        for (bn, sbn) in self.batchnorm.iter_mut().zip(src.batchnorm.iter()) {
            if let (Some(bn), Some(sbn)) = (bn.as_mut(), sbn.as_ref()) {
                blend_vec(&mut bn.gamma, &sbn.gamma);
                blend_vec(&mut bn.beta, &sbn.beta);
                blend_vec(&mut bn.running_mean, &sbn.running_mean);
                blend_vec(&mut bn.running_var, &sbn.running_var);
            }
        }
    }

    /// Number of trainable tensors (weights, biases, gamma/beta), in the
    /// fixed order shared with [`Gradients`] and [`AdamState`].
    pub(crate) fn tensor_count(&self) -> usize {
        self.num_layers() * 2 + 2 * self.batchnorm.iter().flatten().count()
    }

    pub(crate) fn tensor_slice(&self, idx: usize) -> &[f64] {
        self.tensor_ref(idx).0
    }

    pub(crate) fn tensor_slice_mut(&mut self, idx: usize) -> &mut [f64] {
        let layers = self.num_layers();
        if idx < layers {
            return self.weights[idx].as_mut_slice();
        }
        if idx < 2 * layers {
            return self.biases[idx - layers].as_mut_slice();
        }
        let mut rest = idx - 2 * layers;
        for bn in self.batchnorm.iter_mut().flatten() {
            if rest == 0 {
                return bn.gamma.as_mut_slice();
            }
            if rest == 1 {
                return bn.beta.as_mut_slice();
            }
            rest -= 2;
        }
        panic!("tensor index {idx} out of range");
    }

    pub(crate) fn tensor_ref(&self, idx: usize) -> (&[f64], String) {
        let layers = self.num_layers();
        if idx < layers {
            return (self.weights[idx].as_slice(), format!("weights[{idx}]"));
        }
        if idx < 2 * layers {
            let l = idx - layers;
            return (self.biases[l].as_slice(), format!("biases[{l}]"));
        }
        let mut rest = idx - 2 * layers;
        for (l, bn) in self.batchnorm.iter().enumerate() {
            if let Some(bn) = bn {
                if rest == 0 {
                    return (bn.gamma.as_slice(), format!("gamma[{l}]"));
                }
                if rest == 1 {
                    return (bn.beta.as_slice(), format!("beta[{l}]"));
                }
                rest -= 2;
            }
        }
        panic!("tensor index {idx} out of range");
    }
}

impl Gradients {
    pub(crate) fn tensor_slice(&self, idx: usize) -> &[f64] {
        let layers = self.weights.len();
        if idx < layers {
            return self.weights[idx].as_slice();
        }
        if idx < 2 * layers {
            return self.biases[idx - layers].as_slice();
        }
        let mut rest = idx - 2 * layers;
        for bn in self.batchnorm.iter().flatten() {
            if rest == 0 {
                return bn.0.as_slice();
            }
            if rest == 1 {
                return bn.1.as_slice();
            }
            rest -= 2;
        }
        panic!("gradient tensor index {idx} out of range");
    }
}

fn bn_forward(bn: &mut BatchNorm, z: &DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, BnCache) {
    let b = z.ncols() as f64;
    let (mean, var, batch_stats) = match mode {
        Mode::Train | Mode::TrainFrozen => {
            let mean = DVector::from_fn(z.nrows(), |r, _| z.row(r).sum() / b);
            let var = DVector::from_fn(z.nrows(), |r, _| {
                z.row(r).iter().map(|v| (v - mean[r]).powi(2)).sum::<f64>() / b
            });
            if mode == Mode::Train {
                let m = bn.momentum;
                bn.running_mean.zip_apply(&mean, |rm, bm| *rm = (1.0 - m) * *rm + m * bm);
                bn.running_var.zip_apply(&var, |rv, bv| *rv = (1.0 - m) * *rv + m * bv);
            }
            (mean, var, true)
        }
        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone(), false),
    };
    let inv_std = var.map(|v| 1.0 / (v + bn.epsilon).sqrt());
    let mut xhat = z.clone();
    for mut col in xhat.column_iter_mut() {
        for r in 0..col.nrows() {
            col[r] = (col[r] - mean[r]) * inv_std[r];
        }
    }
    let mut y = xhat.clone();
    for mut col in y.column_iter_mut() {
        for r in 0..col.nrows() {
            col[r] = bn.gamma[r] * col[r] + bn.beta[r];
        }
    }
    (y, BnCache { xhat, inv_std, batch_stats })
}

fn bn_backward(
    bn: &BatchNorm,
    cache: &BnCache,
    upstream: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let b = upstream.ncols() as f64;
    let rows = upstream.nrows();
    let dgamma = DVector::from_fn(rows, |r, _| {
        upstream.row(r).iter().zip(cache.xhat.row(r).iter()).map(|(g, x)| g * x).sum()
    });
    let dbeta = DVector::from_fn(rows, |r, _| upstream.row(r).sum());

    let mut dx = DMatrix::zeros(rows, upstream.ncols());
    if cache.batch_stats {
        // Batch statistics couple the samples:
        // dx = inv_std/B * (B*dxhat - sum(dxhat) - xhat * sum(dxhat .* xhat))
        for r in 0..rows {
            let gamma = bn.gamma[r];
            let istd = cache.inv_std[r];
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for c in 0..upstream.ncols() {
                let dxhat = upstream[(r, c)] * gamma;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * cache.xhat[(r, c)];
            }
            for c in 0..upstream.ncols() {
                let dxhat = upstream[(r, c)] * gamma;
                dx[(r, c)] =
                    istd / b * (b * dxhat - sum_dxhat - cache.xhat[(r, c)] * sum_dxhat_xhat);
            }
        }
    } else {
        // Running statistics are constants.
        for r in 0..rows {
            let scale = bn.gamma[r] * cache.inv_std[r];
            for c in 0..upstream.ncols() {
                dx[(r, c)] = upstream[(r, c)] * scale;
            }
        }
    }
    (dgamma, dbeta, dx)
}
