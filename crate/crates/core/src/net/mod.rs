//! Feedforward regression network trained from scratch.
//!
//! Hidden layers use ReLU, the output layer is linear. All parameters live in a
//! single flat vector (per layer: weights `in × out` row-major, then biases), so
//! the optimizer, the gradient check and the checkpoint code can treat them
//! uniformly.

mod gradcheck;
pub(crate) mod train;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::model::PredictiveModel;
use crate::scaler::Scaler;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use train::{
    mse_and_grad, shuffled_batches, train, weighted_l2, Adam, BatchAugment, TrainConfig,
    TrainHistory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Hidden layer widths, input side first.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl NetworkConfig {
    /// 128/64/32 pyramid used for the aircraft performance model.
    pub fn aircraft_default(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden: vec![128, 64, 32],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(invalid("network needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(invalid("layer sizes must be >= 1"));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let b = self.offset + self.inputs * self.outputs;
        b..b + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    config: NetworkConfig,
    scaler: Scaler,
    params: Vec<f64>,
    #[serde(skip)]
    layers: Vec<LayerShape>,
}

/// Activations kept from a forward pass; `acts[0]` is the (scaled) input and
/// the last entry is the (scaled) output.
pub(crate) struct ForwardCache {
    pub acts: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("forward cache has at least the input")
    }
}

/// He-uniform initialization with zero biases. Identity scalers are attached;
/// bind fitted ones with [`Network::set_scaler`] before training.
pub fn init_network(config: NetworkConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = layout(&config);
    let total = layers.last().map(|l| l.bias().end).unwrap_or(0);
    let mut params = vec![0.0; total];
    for l in &layers {
        let limit = (6.0 / l.inputs as f64).sqrt();
        for p in &mut params[l.weights()] {
            *p = rng.gen_range(-limit..limit);
        }
    }
    Ok(Network {
        scaler: Scaler::identity(config.input_dim, config.output_dim),
        config,
        params,
        layers,
    })
}

fn layout(config: &NetworkConfig) -> Vec<LayerShape> {
    let mut offset = 0;
    config
        .layer_shapes()
        .into_iter()
        .map(|(i, o)| {
            let l = LayerShape {
                inputs: i,
                outputs: o,
                offset,
            };
            offset += i * o + o;
            l
        })
        .collect()
}

impl Network {
    pub fn from_parts(config: NetworkConfig, scaler: Scaler, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layers = layout(&config);
        let expected = layers.last().map(|l| l.bias().end).unwrap_or(0);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(invalid("network parameters must be finite"));
        }
        if scaler.inputs.dim() != config.input_dim || scaler.outputs.dim() != config.output_dim {
            return Err(invalid("scaler dimensions do not match the network"));
        }
        Ok(Self {
            config,
            scaler,
            params,
            layers,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn set_scaler(&mut self, scaler: Scaler) -> Result<()> {
        if scaler.inputs.dim() != self.config.input_dim || scaler.outputs.dim() != self.config.output_dim {
            return Err(invalid("scaler dimensions do not match the network"));
        }
        self.scaler = scaler;
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    /// Forward pass in scaled space, keeping every activation for backprop.
    pub(crate) fn forward_cached(&self, x: &Matrix) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = affine(acts.last().unwrap(), &self.params, l);
            if li < last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Scaled-space forward pass without caching.
    pub(crate) fn forward(&self, x: &Matrix) -> Matrix {
        let last = self.layers.len() - 1;
        let mut a = affine(x, &self.params, &self.layers[0]);
        for (li, l) in self.layers.iter().enumerate() {
            if li > 0 {
                a = affine(&a, &self.params, l);
            }
            if li < last {
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        a
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the scaled output)
    /// and returns the gradient w.r.t. every parameter.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: &Matrix) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = d_out.clone();
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let a_prev = &cache.acts[li];
            let (gw, gb) = grad[l.offset..l.bias().end].split_at_mut(l.inputs * l.outputs);
            for r in 0..delta.rows() {
                let d = delta.row(r);
                for (k, &a) in a_prev.row(r).iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (g, &dj) in gw[k * l.outputs..(k + 1) * l.outputs].iter_mut().zip(d) {
                        *g += a * dj;
                    }
                }
                for (g, &dj) in gb.iter_mut().zip(d) {
                    *g += dj;
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.params[l.weights()];
            let mut prev = Matrix::zeros(delta.rows(), l.inputs);
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let a = a_prev.row(r);
                for (k, out) in prev.row_mut(r).iter_mut().enumerate() {
                    // ReLU derivative: active iff the post-activation is positive
                    if a[k] > 0.0 {
                        *out = w[k * l.outputs..(k + 1) * l.outputs]
                            .iter()
                            .zip(d)
                            .map(|(wk, dj)| wk * dj)
                            .sum();
                    }
                }
            }
            delta = prev;
        }
        grad
    }

    /// Scaled input → scaled output, after checking dimension and finiteness.
    pub(crate) fn scale_inputs(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: batch.cols(),
            });
        }
        if let Some(i) = batch.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                row: i / batch.cols(),
                column: i % batch.cols(),
            });
        }
        self.scaler.inputs.transform(batch)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Network = serde_json::from_str(text)?;
        Self::from_parts(raw.config, raw.scaler, raw.params)
    }
}

fn affine(x: &Matrix, params: &[f64], l: &LayerShape) -> Matrix {
    let w = &params[l.weights()];
    let b = &params[l.bias()];
    let mut out = Matrix::zeros(x.rows(), l.outputs);
    for r in 0..x.rows() {
        let o = out.row_mut(r);
        o.copy_from_slice(b);
        for (k, &a) in x.row(r).iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (oj, &wj) in o.iter_mut().zip(&w[k * l.outputs..(k + 1) * l.outputs]) {
                *oj += a * wj;
            }
        }
    }
    out
}

impl PredictiveModel for Network {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let x = self.scale_inputs(batch)?;
        self.scaler.outputs.inverse_transform(&self.forward(&x))
    }
}
