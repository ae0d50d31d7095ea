//! Physics-informed regularization: hinge costs on rule violations, dynamic
//! λ calibration, regularized fine-tuning and rule-based data augmentation.

mod augment;
mod finetune;
mod store;

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

pub use augment::{augment_batch, Assign, AugmentationRule, Augmenter, Edit};
pub use finetune::{finetune, Checkpoint, FinetuneConfig, FinetuneHistory, FinetuneOutcome, FinetuneStep};
pub use store::{AxStore, Provenance};

/// Regularization cost of one (parent, adversarial) prediction pair.
///
/// Zero while the deviation from the expected direction stays within `tol`,
/// quadratic in the excess beyond it.
pub fn r_phys(fx: f64, fx_hat: f64, d: i8, tol: f64) -> f64 {
    match d {
        1 => {
            let e = tol.max(fx - fx_hat) - tol;
            e * e
        }
        -1 => {
            let e = tol.max(fx_hat - fx) - tol;
            e * e
        }
        _ => {
            let diff = fx - fx_hat;
            (tol * tol).max(diff * diff) - tol * tol
        }
    }
}

/// Single-formula version of [`r_phys`]:
/// `[max(tol^p2, ((−1)^p3 (fx − fx_hat))^p2) − tol^p2]^p1`
/// with `p1 = 1 + d²`, `p2 = 2 − d²`, `p3 = |d|((d + 1)/2 + 1)`.
pub fn r_phys_general(fx: f64, fx_hat: f64, d: i8, tol: f64) -> Result<f64> {
    if !(-1..=1).contains(&d) {
        return Err(invalid(format!("rule direction must be -1, 0 or 1, got {d}")));
    }
    let d = i32::from(d);
    let p1 = 1 + d * d;
    let p2 = 2 - d * d;
    // (d + 1)/2 is 0 or 1 for d in {-1, 1} and irrelevant for d = 0
    let p3 = d.abs() * ((d + 1) / 2 + 1);
    let sign = if p3 % 2 == 0 { 1.0 } else { -1.0 };
    let t = tol.powi(p2);
    let v = (sign * (fx - fx_hat)).powi(p2);
    Ok((t.max(v) - t).powi(p1))
}

/// Partial derivatives of [`r_phys`] with respect to `fx` and `fx_hat`.
pub(crate) fn r_phys_grad(fx: f64, fx_hat: f64, d: i8, tol: f64) -> (f64, f64) {
    match d {
        1 => {
            let u = fx - fx_hat;
            if u > tol {
                let g = 2.0 * (u - tol);
                (g, -g)
            } else {
                (0.0, 0.0)
            }
        }
        -1 => {
            let u = fx_hat - fx;
            if u > tol {
                let g = 2.0 * (u - tol);
                (-g, g)
            } else {
                (0.0, 0.0)
            }
        }
        _ => {
            let u = fx - fx_hat;
            if u * u > tol * tol {
                (2.0 * u, -2.0 * u)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// One adversarial prediction linked to a row of the current batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegTerm {
    /// Row of the parent inside the batch.
    pub parent: usize,
    pub target: usize,
    pub fx_hat: f64,
    pub d: i8,
    pub tol: f64,
}

/// Mean [`r_phys`] over the terms linked to a batch; 0 when none are linked.
pub fn batch_reg_cost(parent_preds: &Matrix, terms: &[RegTerm]) -> Result<f64> {
    if terms.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for t in terms {
        if t.parent >= parent_preds.rows() {
            return Err(Error::OrphanAdversarial(t.parent));
        }
        sum += r_phys(parent_preds.get(t.parent, t.target), t.fx_hat, t.d, t.tol);
    }
    Ok(sum / terms.len() as f64)
}

/// `floor(log10 v)`, exact at powers of ten.
pub fn magnitude_order(v: f64) -> Result<i32> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("magnitude order needs a finite positive value, got {v}")));
    }
    let mut m = v.log10().floor() as i32;
    if 10f64.powi(m) > v {
        m -= 1;
    } else if 10f64.powi(m + 1) <= v {
        m += 1;
    }
    Ok(m)
}

/// `β · 10^{magnitude_order(base / reg)}`: scales the regularization term to
/// the magnitude of the data loss.
pub fn dynamic_lambda(base_data_loss: f64, reg_cost: f64, beta: f64) -> Result<f64> {
    if !(base_data_loss > 0.0 && reg_cost > 0.0) {
        return Err(invalid("dynamic lambda needs positive losses"));
    }
    if !(beta >= 1.0) {
        return Err(invalid(format!("beta must be >= 1, got {beta}")));
    }
    Ok(beta * 10f64.powi(magnitude_order(base_data_loss / reg_cost)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hinge_cases() {
        assert!((r_phys(2.0, 1.2, 1, 0.5) - 0.09).abs() < 1e-12);
        assert_eq!(r_phys(1.0, 1.4, 0, 0.5), 0.0);
        assert_eq!(r_phys(1.0, 1.5, -1, 0.0), 0.25);
    }

    #[test]
    fn generic_form_cases() {
        assert!((r_phys_general(2.0, 1.2, 1, 0.5).unwrap() - 0.09).abs() < 1e-12);
        assert_eq!(r_phys_general(1.0, 1.4, 0, 0.5).unwrap(), 0.0);
        assert_eq!(r_phys_general(1.0, 1.5, -1, 0.0).unwrap(), 0.25);
        assert!(r_phys_general(1.0, 1.0, 2, 0.0).is_err());
    }

    #[test]
    fn batch_mean() {
        let parents = Matrix::from_rows(&[[2.0], [1.0]], 1).unwrap();
        let terms = [
            RegTerm { parent: 0, target: 0, fx_hat: 1.2, d: 1, tol: 0.5 },
            RegTerm { parent: 1, target: 0, fx_hat: 1.5, d: -1, tol: 0.0 },
        ];
        assert!((batch_reg_cost(&parents, &terms).unwrap() - 0.17).abs() < 1e-12);
        assert_eq!(batch_reg_cost(&parents, &[]).unwrap(), 0.0);
        let inside = [RegTerm { parent: 0, target: 0, fx_hat: 2.1, d: 0, tol: 0.5 }];
        assert_eq!(batch_reg_cost(&parents, &inside).unwrap(), 0.0);
        let orphan = [RegTerm { parent: 5, target: 0, fx_hat: 0.0, d: 0, tol: 0.0 }];
        assert!(matches!(batch_reg_cost(&parents, &orphan), Err(Error::OrphanAdversarial(5))));
    }

    #[test]
    fn magnitude_orders() {
        assert_eq!(magnitude_order(0.004).unwrap(), -3);
        assert_eq!(magnitude_order(105.0).unwrap(), 2);
        assert_eq!(magnitude_order(1.0).unwrap(), 0);
        assert_eq!(magnitude_order(1000.0).unwrap(), 3);
        assert_eq!(magnitude_order(1e-3).unwrap(), -3);
        assert_eq!(magnitude_order(0.00099999).unwrap(), -4);
        assert!(magnitude_order(0.0).is_err());
        assert!(magnitude_order(-1.0).is_err());
    }

    #[test]
    fn lambda_cases() {
        assert!((dynamic_lambda(0.01, 10.0, 1.0).unwrap() - 1e-3).abs() < 1e-18);
        assert_eq!(dynamic_lambda(0.3, 0.3, 1.0).unwrap(), 1.0);
        assert!((dynamic_lambda(0.01, 10.0, 10.0).unwrap() - 1e-2).abs() < 1e-17);
        assert!(dynamic_lambda(0.0, 1.0, 1.0).is_err());
        assert!(dynamic_lambda(1.0, 1.0, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn forms_agree(fx in -50.0f64..50.0, fxh in -50.0f64..50.0, tol in 0.0f64..5.0, d in -1i8..=1) {
            let a = r_phys(fx, fxh, d, tol);
            let b = r_phys_general(fx, fxh, d, tol).unwrap();
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        #[test]
        fn zero_exactly_within_tolerance(fx in -5.0f64..5.0, fxh in -5.0f64..5.0, tol in 0.0f64..2.0, d in -1i8..=1) {
            let c = r_phys(fx, fxh, d, tol);
            prop_assert!(c >= 0.0);
            let within = match d {
                1 => fx - fxh <= tol,
                -1 => fxh - fx <= tol,
                _ => (fx - fxh).abs() <= tol,
            };
            prop_assert_eq!(c == 0.0, within);
        }

        #[test]
        fn monotone_in_violation(base in 0.0f64..3.0, extra in 0.0f64..3.0, tol in 0.0f64..2.0, d in -1i8..=1) {
            // deviation magnitude in the violating direction: base, then base + extra
            let dev = |m: f64| if d == -1 { (0.0, m) } else { (m, 0.0) };
            let (a1, b1) = dev(base);
            let (a2, b2) = dev(base + extra);
            prop_assert!(r_phys(a2, b2, d, tol) >= r_phys(a1, b1, d, tol));
        }

        #[test]
        fn gradient_matches_differences(fx in -3.0f64..3.0, fxh in -3.0f64..3.0, tol in 0.0f64..1.0, d in -1i8..=1) {
            let h = 1e-6;
            let u = match d { 1 => fx - fxh, -1 => fxh - fx, _ => (fx - fxh).abs() };
            prop_assume!((u - tol).abs() > 1e-3);
            let (gx, gh) = r_phys_grad(fx, fxh, d, tol);
            let nx = (r_phys(fx + h, fxh, d, tol) - r_phys(fx - h, fxh, d, tol)) / (2.0 * h);
            let nh = (r_phys(fx, fxh + h, d, tol) - r_phys(fx, fxh - h, d, tol)) / (2.0 * h);
            prop_assert!((gx - nx).abs() < 1e-5 && (gh - nh).abs() < 1e-5);
        }

        #[test]
        fn lambda_aligns_magnitudes(base in 1e-6f64..1e3, reg in 1e-6f64..1e3) {
            let lam = dynamic_lambda(base, reg, 1.0).unwrap();
            let m = magnitude_order(base).unwrap();
            let got = magnitude_order(lam * reg).unwrap();
            prop_assert!((got - m).abs() <= 1);
        }
    }
}
