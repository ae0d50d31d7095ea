use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Coupled L2 coefficient: the loss gains `weight_decay/2 * ||θ||²`.
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// 250 epochs, batch 64, η = 1e-4, L2 5e-4.
    pub fn aircraft_default() -> Self {
        Self {
            epochs: 250,
            batch_size: 64,
            learning_rate: 1e-4,
            weight_decay: 5e-4,
            seed: 0,
        }
    }

    /// 300 epochs, batch 16, η = 1e-3, L2 1e-4.
    pub fn anti_icing_default() -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(invalid("learning_rate and weight_decay must be >= 0"));
        }
        Ok(())
    }
}

/// Online data augmentation applied to raw (unscaled) mini-batches.
pub trait BatchAugment {
    fn augment(&self, inputs: &mut Matrix, outputs: &mut Matrix, rng: &mut dyn RngCore);
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Scaled-space MSE over the whole training set after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Scaled-space MSE of each mini-batch, before its update.
    pub batch_loss: Vec<f64>,
}

/// Adam with bias correction (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Mean squared error over all cells, and its gradient w.r.t. `pred`.
pub fn mse_and_grad(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    let n = (pred.rows() * pred.cols()).max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), y) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let e = p - y;
        loss += e * e;
        *g = 2.0 * e / n;
    }
    (loss / n, grad)
}

pub(crate) fn mse(pred: &Matrix, target: &Matrix) -> f64 {
    let n = (pred.rows() * pred.cols()).max(1) as f64;
    pred.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n
}

/// `weight_decay/2 * ||θ||²`.
pub fn weighted_l2(params: &[f64], weight_decay: f64) -> f64 {
    0.5 * weight_decay * params.iter().map(|p| p * p).sum::<f64>()
}

pub(crate) fn add_weight_decay(grad: &mut [f64], params: &[f64], weight_decay: f64) {
    if weight_decay != 0.0 {
        for (g, p) in grad.iter_mut().zip(params) {
            *g += weight_decay * p;
        }
    }
}

/// Shuffles `0..n` with `rng` and cuts it into consecutive batches.
pub fn shuffled_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Scaled copies of a dataset's inputs and outputs under the network's scaler.
pub(crate) fn scaled_data(network: &Network, dataset: &Dataset) -> Result<(Matrix, Matrix)> {
    let x = network.scale_inputs(dataset.inputs())?;
    if dataset.outputs().cols() != network.config.output_dim {
        return Err(Error::DimensionMismatch {
            expected: network.config.output_dim,
            got: dataset.outputs().cols(),
        });
    }
    let y = network.scaler.outputs.transform(dataset.outputs())?;
    Ok((x, y))
}

/// Mini-batch Adam on MSE + L2, in scaled space.
///
/// The network's scaler is used as-is; fit it on the training split first.
pub fn train(
    network: &mut Network,
    dataset: &Dataset,
    config: &TrainConfig,
    augmentation: Option<&dyn BatchAugment>,
) -> Result<TrainHistory> {
    config.validate()?;
    let (x, y) = scaled_data(network, dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(config.seed);
    aug_rng.set_stream(1);
    let mut adam = Adam::new(network.num_params(), config.learning_rate);
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        for batch in shuffled_batches(dataset.len(), config.batch_size, &mut rng) {
            let (bx, by) = match augmentation {
                None => (x.select_rows(&batch), y.select_rows(&batch)),
                Some(aug) => {
                    let mut raw_x = dataset.inputs().select_rows(&batch);
                    let mut raw_y = dataset.outputs().select_rows(&batch);
                    aug.augment(&mut raw_x, &mut raw_y, &mut aug_rng);
                    (
                        network.scaler.inputs.transform(&raw_x)?,
                        network.scaler.outputs.transform(&raw_y)?,
                    )
                }
            };
            let cache = network.forward_cached(&bx);
            let (loss, d_out) = mse_and_grad(cache.output(), &by);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            history.batch_loss.push(loss);
            let mut grad = network.backward(&cache, &d_out);
            add_weight_decay(&mut grad, &network.params, config.weight_decay);
            adam.step(&mut network.params, &grad);
        }
        let epoch_loss = mse(&network.forward(&x), &y);
        if !epoch_loss.is_finite() || !network.params.iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.epoch_loss.push(epoch_loss);
    }
    Ok(history)
}
