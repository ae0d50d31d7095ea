//! Zero-mean / unit-variance standardization.
//!
//! The standard deviation uses the population form (divide by N).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Per-column mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        if n < 2 {
            return Err(invalid("scaler fit needs at least two rows"));
        }
        let mut mean = vec![0.0; m.cols()];
        for row in m.iter_rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = vec![0.0; m.cols()];
        for row in m.iter_rows() {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let mut std = Vec::with_capacity(m.cols());
        for (c, v) in var.into_iter().enumerate() {
            let s = (v / n as f64).sqrt();
            // relative threshold: a column of identical large values can leave rounding residue
            if !(s > 1e-12 * mean[c].abs().max(1.0)) {
                return Err(Error::ZeroVariance(c));
            }
            std.push(s);
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.cols(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + mu;
            }
        }
        Ok(out)
    }

    pub fn transform_value(&self, col: usize, v: f64) -> f64 {
        (v - self.mean[col]) / self.std[col]
    }

    pub fn inverse_value(&self, col: usize, v: f64) -> f64 {
        v * self.std[col] + self.mean[col]
    }
}

/// Input and output standardizers of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub inputs: Standardizer,
    pub outputs: Standardizer,
}

impl Scaler {
    pub fn identity(input_dim: usize, output_dim: usize) -> Self {
        Self {
            inputs: Standardizer::identity(input_dim),
            outputs: Standardizer::identity(output_dim),
        }
    }
}

/// Fits input and output standardizers on a (training) dataset.
pub fn fit_scaler(dataset: &Dataset) -> Result<Scaler> {
    Ok(Scaler {
        inputs: Standardizer::fit(dataset.inputs())?,
        outputs: Standardizer::fit(dataset.outputs())?,
    })
}
