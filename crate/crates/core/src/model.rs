use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Black-box regression model: raw-space inputs in, raw-space outputs out.
///
/// Implementations must be deterministic and must not mutate state on
/// prediction; campaigns call `predict` concurrently from many threads.
pub trait PredictiveModel: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn predict(&self, batch: &Matrix) -> Result<Matrix>;

    fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Matrix::row_vector(x))?.row(0).to_vec())
    }
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        (**self).predict(batch)
    }
}

/// Wraps a per-row closure as a model.
pub struct FnModel<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F> PredictiveModel for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: batch.cols(),
            });
        }
        let mut out = Matrix::zeros(batch.rows(), self.output_dim);
        for (r, row) in batch.iter_rows().enumerate() {
            let y = (self.f)(row);
            if y.len() != self.output_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.output_dim,
                    got: y.len(),
                });
            }
            out.row_mut(r).copy_from_slice(&y);
        }
        Ok(out)
    }
}
