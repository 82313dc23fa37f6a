//! Central finite-difference verification of the analytic gradients.

use nalgebra::DMatrix;

use super::{DenseNet, Mode};
use crate::error::Result;

/// Outcome of a gradient check over every parameter of a network.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error across all parameters.
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Name of the tensor holding the worst parameter.
    pub worst_tensor: String,
    pub worst_index: usize,
    pub num_params: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Relative error with a floor on the denominator, so finite-difference
/// round-off on near-zero gradients does not dominate the report.
fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares analytic backpropagation against central finite differences of
/// the scalar loss, for every parameter.
///
/// `loss` maps the network output to a scalar and its derivative w.r.t. the
/// output; it must be a pure function. Forward passes use batch statistics
/// without updating running ones, so perturbed evaluations see a consistent
/// function of the parameters.
pub fn grad_check<L>(
    net: &mut DenseNet,
    batch: &DMatrix<f64>,
    loss: L,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    L: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>),
{
    let (out, cache) = net.forward(batch, Mode::TrainFrozen)?;
    let (_, upstream) = loss(&out);
    let grads = net.backward(&cache, &upstream)?;

    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    let mut worst_tensor = String::new();
    let mut worst_index = 0;
    let mut num_params = 0usize;

    for idx in 0..net.tensor_count() {
        let len = net.tensor_slice(idx).len();
        for i in 0..len {
            let original = net.tensor_slice(idx)[i];

            net.tensor_slice_mut(idx)[i] = original + step;
            let (out_p, _) = net.forward(batch, Mode::TrainFrozen)?;
            let (loss_p, _) = loss(&out_p);

            net.tensor_slice_mut(idx)[i] = original - step;
            let (out_m, _) = net.forward(batch, Mode::TrainFrozen)?;
            let (loss_m, _) = loss(&out_m);

            net.tensor_slice_mut(idx)[i] = original;

            let numeric = (loss_p - loss_m) / (2.0 * step);
            let analytic = grads.tensor_slice(idx)[i];
            let rel = rel_error(analytic, numeric);
            sum_rel += rel;
            num_params += 1;
            if rel > max_rel {
                max_rel = rel;
                worst_tensor = net.tensor_ref(idx).1;
                worst_index = i;
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        mean_rel_error: if num_params > 0 { sum_rel / num_params as f64 } else { 0.0 },
        worst_tensor,
        worst_index,
        num_params,
        tolerance,
    })
}

/// Smallest hidden preactivation magnitude seen by a ReLU in the cached
/// pass. Tests use it to reject inputs that sit on a kink.
pub fn min_relu_input_magnitude(net: &mut DenseNet, batch: &DMatrix<f64>) -> Result<f64> {
    let (_, cache) = net.forward(batch, Mode::TrainFrozen)?;
    let mut min_mag = f64::INFINITY;
    for lc in cache.layers.iter().take(cache.layers.len() - 1) {
        for v in lc.act_in.iter() {
            min_mag = min_mag.min(v.abs());
        }
    }
    Ok(min_mag)
}
