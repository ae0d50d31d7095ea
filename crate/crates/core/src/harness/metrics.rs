use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Root mean squared error per output column.
pub fn rmse(predictions: &Matrix, targets: &Matrix) -> Result<Vec<f64>> {
    if predictions.rows() != targets.rows() || predictions.cols() != targets.cols() {
        return Err(Error::DimensionMismatch {
            expected: targets.rows() * targets.cols(),
            got: predictions.rows() * predictions.cols(),
        });
    }
    if targets.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = targets.rows() as f64;
    let mut sse = vec![0.0; targets.cols()];
    for (p, t) in predictions.iter_rows().zip(targets.iter_rows()) {
        for ((acc, a), b) in sse.iter_mut().zip(p).zip(t) {
            *acc += (a - b) * (a - b);
        }
    }
    Ok(sse.into_iter().map(|s| (s / n).sqrt()).collect())
}

/// Reduction of revealed adversarial inputs in percent; `None` when `pre == 0`.
pub fn improv_advin(pre: usize, post: usize) -> Option<f64> {
    if pre == 0 {
        None
    } else {
        Some((pre as f64 - post as f64) / pre as f64 * 100.0)
    }
}

/// Signed relative change of the prediction error in percent; positive means
/// the error grew.
pub fn change_rmse(pre: f64, post: f64) -> Result<f64> {
    if !(pre > 0.0) {
        return Err(invalid(format!("pre-RMSE must be > 0, got {pre}")));
    }
    Ok((post - pre) / pre * 100.0)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_viii_rows() {
        assert!((improv_advin(5267, 1012).unwrap() - 80.78).abs() < 0.01);
        assert_eq!(improv_advin(509, 0), Some(100.0));
        assert_eq!(improv_advin(42, 42), Some(0.0));
        assert_eq!(improv_advin(0, 3), None);
    }

    #[test]
    fn table_ix_rows() {
        assert!((change_rmse(0.498, 0.996).unwrap() - 100.0).abs() < 0.01);
        assert!((change_rmse(0.498, 0.444).unwrap() + 10.84).abs() < 0.01);
        assert_eq!(change_rmse(0.3, 0.3).unwrap(), 0.0);
        assert!(change_rmse(0.0, 1.0).is_err());
    }

    #[test]
    fn rmse_cases() {
        let t = Matrix::from_rows(&[[1.0], [2.0]], 1).unwrap();
        assert_eq!(rmse(&t, &t).unwrap(), vec![0.0]);
        let p = Matrix::from_rows(&[[4.0], [-2.0]], 1).unwrap();
        assert!((rmse(&p, &t).unwrap()[0] - 12.5f64.sqrt()).abs() < 1e-12);
        let e = Matrix::zeros(0, 1);
        assert!(rmse(&e, &e).is_err());
        assert!(rmse(&Matrix::zeros(2, 2), &t).is_err());
    }

    #[test]
    fn spread() {
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert_eq!(std_dev(&[1.0, 3.0]), 1.0);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }
}
