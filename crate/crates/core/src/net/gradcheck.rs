use super::train::{add_weight_decay, mse, mse_and_grad, scaled_data, weighted_l2};
use super::Network;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose ±eps perturbation flipped a ReLU on or off; central
    /// differences are meaningless across a kink so these are not compared.
    pub skipped_at_kink: usize,
}

/// Relative-error denominators are floored here; below it rounding noise of the
/// finite difference dominates.
const DENOM_FLOOR: f64 = 1e-6;

/// Compares the backprop gradient of `MSE + weight_decay/2·||θ||²` (scaled
/// space) against central finite differences over every parameter.
pub fn gradient_check(network: &Network, batch: &Dataset, weight_decay: f64, eps: f64) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(invalid("eps must lie in [1e-7, 1e-3]"));
    }
    let (x, y) = scaled_data(network, batch)?;
    let cache = network.forward_cached(&x);
    let (_, d_out) = mse_and_grad(cache.output(), &y);
    let mut analytic = network.backward(&cache, &d_out);
    add_weight_decay(&mut analytic, network.params(), weight_decay);
    let base_mask = relu_mask(network, &x);

    let loss = |n: &Network| mse(&n.forward(&x), &y) + weighted_l2(n.params(), weight_decay);

    let mut probe = network.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kink: 0,
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..network.num_params() {
        let orig = probe.params[i];
        probe.params[i] = orig + eps;
        let plus = loss(&probe);
        let kink_plus = relu_mask(&probe, &x) != base_mask;
        probe.params[i] = orig - eps;
        let minus = loss(&probe);
        let kink_minus = relu_mask(&probe, &x) != base_mask;
        probe.params[i] = orig;
        if kink_plus || kink_minus {
            report.skipped_at_kink += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        report.max_relative_error = report.max_relative_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

fn relu_mask(network: &Network, x: &Matrix) -> Vec<bool> {
    let cache = network.forward_cached(x);
    let hidden = &cache.acts[1..cache.acts.len() - 1];
    hidden
        .iter()
        .flat_map(|a| a.as_slice().iter().map(|v| *v > 0.0))
        .collect()
}
