use rand::{Rng, RngCore};

use crate::data::Schema;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::net::BatchAugment;
use crate::rulespace::Condition;

/// New value of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assign {
    /// Add the rule's sampled parameter `t`.
    ShiftByT,
    Value(f64),
    /// Copy a feature of the transformed row.
    Feature(usize),
}

/// Edit of one input feature or one target column, by index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edit {
    pub index: usize,
    pub assign: Assign,
}

/// A physics-preserving transformation of a training example.
///
/// One-to-many rules carry a parameter range and sample `t` from it per use.
/// Input edits run first; target edits that copy a feature read the edited row.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRule {
    pub id: String,
    pub when: Vec<Condition>,
    pub range: Option<(f64, f64)>,
    pub inputs: Vec<Edit>,
    pub targets: Vec<Edit>,
}

impl AugmentationRule {
    pub fn is_one_to_many(&self) -> bool {
        self.range.is_some()
    }

    pub fn applies_to(&self, x: &[f64]) -> bool {
        self.when.iter().all(|c| c.holds(x))
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if let Some((lo, hi)) = self.range {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(invalid(format!("augmentation `{}`: empty parameter range", self.id)));
            }
        }
        let uses_t = self.inputs.iter().chain(&self.targets).any(|e| e.assign == Assign::ShiftByT);
        if uses_t && self.range.is_none() {
            return Err(invalid(format!("augmentation `{}`: shift without a parameter range", self.id)));
        }
        let d = schema.input_dim();
        let feature_ok = |e: &Edit| match e.assign {
            Assign::Feature(f) => f < d,
            _ => true,
        };
        if self.inputs.iter().any(|e| e.index >= d || !feature_ok(e))
            || self.targets.iter().any(|e| e.index >= schema.output_dim() || !feature_ok(e))
            || self.when.iter().any(|c| c.feature >= d)
        {
            return Err(invalid(format!("augmentation `{}`: index out of range", self.id)));
        }
        Ok(())
    }

    /// Transformed copy of `(x, y)` with parameter `t`.
    pub fn apply(&self, x: &[f64], y: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut nx = x.to_vec();
        for e in &self.inputs {
            nx[e.index] = match e.assign {
                Assign::ShiftByT => nx[e.index] + t,
                Assign::Value(v) => v,
                Assign::Feature(f) => x[f],
            };
        }
        let mut ny = y.to_vec();
        for e in &self.targets {
            ny[e.index] = match e.assign {
                Assign::ShiftByT => ny[e.index] + t,
                Assign::Value(v) => v,
                Assign::Feature(f) => nx[f],
            };
        }
        (nx, ny)
    }
}

/// Transforms each row with probability `p` by one uniformly chosen applicable
/// rule. Rows whose transform leaves the schema keep their original values.
pub fn augment_batch(
    inputs: &mut Matrix,
    outputs: &mut Matrix,
    rules: &[AugmentationRule],
    p: f64,
    schema: &Schema,
    rng: &mut dyn RngCore,
) {
    if p <= 0.0 || rules.is_empty() {
        return;
    }
    for r in 0..inputs.rows() {
        if !rng.gen_bool(p.min(1.0)) {
            continue;
        }
        let x = inputs.row(r);
        let applicable: Vec<&AugmentationRule> = rules.iter().filter(|a| a.applies_to(x)).collect();
        if applicable.is_empty() {
            continue;
        }
        let rule = applicable[rng.gen_range(0..applicable.len())];
        let t = match rule.range {
            Some((lo, hi)) if hi > lo => rng.gen_range(lo..=hi),
            Some((lo, _)) => lo,
            None => 0.0,
        };
        let (nx, ny) = rule.apply(x, outputs.row(r), t);
        if schema.admits_row(&nx) && ny.iter().all(|v| v.is_finite()) {
            inputs.row_mut(r).copy_from_slice(&nx);
            outputs.row_mut(r).copy_from_slice(&ny);
        }
    }
}

/// [`augment_batch`] packaged for the training loop.
#[derive(Debug, Clone)]
pub struct Augmenter {
    pub rules: Vec<AugmentationRule>,
    pub p: f64,
    pub schema: Schema,
}

impl BatchAugment for Augmenter {
    fn augment(&self, inputs: &mut Matrix, outputs: &mut Matrix, rng: &mut dyn RngCore) {
        augment_batch(inputs, outputs, &self.rules, self.p, &self.schema, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMeta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // features: TAT, TWR, PWR; target: T
    fn schema() -> Schema {
        Schema {
            features: vec![
                FeatureMeta::real("TAT", -60.0, 60.0, 0.1),
                FeatureMeta::real("TWR", -60.0, 150.0, 0.1),
                FeatureMeta::real("PWR", 0.0, 60.0, 0.1),
            ],
            targets: vec!["T".into()],
        }
    }

    fn shift() -> AugmentationRule {
        AugmentationRule {
            id: "shift".into(),
            when: vec![],
            range: Some((-10.0, 10.0)),
            inputs: vec![
                Edit { index: 0, assign: Assign::ShiftByT },
                Edit { index: 1, assign: Assign::ShiftByT },
            ],
            targets: vec![Edit { index: 0, assign: Assign::ShiftByT }],
        }
    }

    fn no_power() -> AugmentationRule {
        AugmentationRule {
            id: "no-power".into(),
            when: vec![],
            range: None,
            inputs: vec![Edit { index: 2, assign: Assign::Value(0.0) }],
            targets: vec![Edit { index: 0, assign: Assign::Feature(0) }],
        }
    }

    fn batch() -> (Matrix, Matrix) {
        (
            Matrix::from_rows(&[[-5.0, 40.0, 20.0], [0.0, 80.0, 35.0], [10.0, 30.0, 5.0]], 3).unwrap(),
            Matrix::from_rows(&[[12.0], [30.0], [18.0]], 1).unwrap(),
        )
    }

    #[test]
    fn shift_by_five() {
        let (x, y) = shift().apply(&[-5.0, 40.0, 20.0], &[12.0], 5.0);
        assert_eq!(x, vec![0.0, 45.0, 20.0]);
        assert_eq!(y, vec![17.0]);
    }

    #[test]
    fn boundary_rule_pins_target() {
        let (mut x, mut y) = batch();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        augment_batch(&mut x, &mut y, &[no_power()], 1.0, &schema(), &mut rng);
        for r in 0..3 {
            assert_eq!(x.get(r, 2), 0.0);
            assert_eq!(y.get(r, 0), x.get(r, 0));
        }
    }

    #[test]
    fn zero_probability_is_identity() {
        let (mut x, mut y) = batch();
        let (x0, y0) = batch();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        augment_batch(&mut x, &mut y, &[shift(), no_power()], 0.0, &schema(), &mut rng);
        assert_eq!((x, y), (x0, y0));
    }

    #[test]
    fn shifted_rows_keep_target_offset() {
        let (x0, y0) = batch();
        let (mut x, mut y) = batch();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        augment_batch(&mut x, &mut y, &[shift()], 1.0, &schema(), &mut rng);
        for r in 0..3 {
            let t = x.get(r, 0) - x0.get(r, 0);
            assert!(t.abs() <= 10.0);
            assert!((x.get(r, 1) - x0.get(r, 1) - t).abs() < 1e-12);
            assert!((y.get(r, 0) - y0.get(r, 0) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_schema_transform_discarded() {
        let mut x = Matrix::from_rows(&[[58.0, 100.0, 1.0]], 3).unwrap();
        let mut y = Matrix::from_rows(&[[60.0]], 1).unwrap();
        let rule = AugmentationRule {
            range: Some((5.0, 5.0)),
            ..shift()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        augment_batch(&mut x, &mut y, &[rule], 1.0, &schema(), &mut rng);
        assert_eq!(x.row(0), &[58.0, 100.0, 1.0]);
        assert_eq!(y.get(0, 0), 60.0);
    }

    #[test]
    fn validation() {
        let s = schema();
        assert!(shift().validate(&s).is_ok());
        let mut bad = shift();
        bad.range = None;
        assert!(bad.validate(&s).is_err());
        let mut bad = no_power();
        bad.inputs[0].index = 7;
        assert!(bad.validate(&s).is_err());
    }
}
