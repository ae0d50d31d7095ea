use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Schema;
use crate::error::{Error, Result};

/// Signed change of a premise feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increase,
    Decrease,
}

/// Expected output behaviour, `d ∈ {+1, 0, −1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Increase,
    Invariant,
    Decrease,
}

impl Expectation {
    pub fn sign(self) -> i8 {
        match self {
            Expectation::Increase => 1,
            Expectation::Invariant => 0,
            Expectation::Decrease => -1,
        }
    }

    pub fn from_sign(d: i8) -> Option<Self> {
        match d {
            1 => Some(Expectation::Increase),
            0 => Some(Expectation::Invariant),
            -1 => Some(Expectation::Decrease),
            _ => None,
        }
    }

    /// Rule-type label: `incr`, `cons` or `decr`.
    pub fn label(self) -> &'static str {
        match self {
            Expectation::Increase => "incr",
            Expectation::Invariant => "cons",
            Expectation::Decrease => "decr",
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// `x[feature] <op> value`, evaluated on encoded values.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub op: CmpOp,
    pub value: f64,
}

impl Condition {
    pub fn new(feature: usize, op: CmpOp, value: f64) -> Self {
        Self { feature, op, value }
    }

    pub fn eq(feature: usize, value: f64) -> Self {
        Self::new(feature, CmpOp::Eq, value)
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.op {
            CmpOp::Eq => v == self.value,
            CmpOp::Ne => v != self.value,
            CmpOp::Lt => v < self.value,
            CmpOp::Le => v <= self.value,
            CmpOp::Gt => v > self.value,
            CmpOp::Ge => v >= self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Premise {
    pub feature: usize,
    pub trend: Trend,
}

/// Perturbation radius of a feature allowed to wiggle under an invariance rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius {
    pub feature: usize,
    pub radius: f64,
}

/// Expert-declared input/output sensitivity.
///
/// Directional rules (`expect != Invariant`) list signed premises; invariance
/// rules list the features they allow to move and by how much. Features are
/// referenced by schema index.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRule {
    pub id: String,
    pub premises: Vec<Premise>,
    pub radii: Vec<Radius>,
    /// All must hold at the anchor for the rule to apply.
    pub applicability: Vec<Condition>,
    pub targets: Vec<usize>,
    pub expect: Expectation,
    /// Output tolerance, raw target units.
    pub tol: f64,
}

impl SensitivityRule {
    pub fn directional(id: impl Into<String>, premises: Vec<Premise>, expect: Expectation, targets: Vec<usize>, tol: f64) -> Self {
        Self {
            id: id.into(),
            premises,
            radii: Vec::new(),
            applicability: Vec::new(),
            targets,
            expect,
            tol,
        }
    }

    pub fn invariant(id: impl Into<String>, radii: Vec<Radius>, targets: Vec<usize>, tol: f64) -> Self {
        Self {
            id: id.into(),
            premises: Vec::new(),
            radii,
            applicability: Vec::new(),
            targets,
            expect: Expectation::Invariant,
            tol,
        }
    }

    pub fn when(mut self, cond: Condition) -> Self {
        self.applicability.push(cond);
        self
    }

    pub fn applies_to(&self, x: &[f64]) -> bool {
        self.applicability.iter().all(|c| c.holds(x))
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("rule `{}`: {msg}", self.id)));
        let d = schema.input_dim();
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return bad("tolerance must be finite and >= 0".into());
        }
        if self.targets.is_empty() {
            return bad("no target".into());
        }
        if let Some(t) = self.targets.iter().find(|&&t| t >= schema.output_dim()) {
            return bad(format!("target index {t} out of range"));
        }
        match self.expect {
            Expectation::Invariant => {
                if self.radii.is_empty() {
                    return bad("invariance rule lists no perturbable feature".into());
                }
                if !self.premises.is_empty() {
                    return bad("invariance rule must not declare directional premises".into());
                }
            }
            _ => {
                if self.premises.is_empty() {
                    return bad("directional rule without premises".into());
                }
            }
        }
        for f in self
            .premises
            .iter()
            .map(|p| p.feature)
            .chain(self.radii.iter().map(|r| r.feature))
            .chain(self.applicability.iter().map(|c| c.feature))
        {
            if f >= d {
                return bad(format!("feature index {f} out of range"));
            }
        }
        if let Some(r) = self.radii.iter().find(|r| !(r.radius >= 0.0 && r.radius.is_finite())) {
            return bad(format!("radius of `{}` must be >= 0", schema.features[r.feature].name));
        }
        Ok(())
    }
}

/// Rules whose applicability predicate holds at `x`.
pub fn applicable_rules<'a>(rules: &'a [SensitivityRule], x: &[f64]) -> Vec<&'a SensitivityRule> {
    rules.iter().filter(|r| r.applies_to(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(id: &str) -> SensitivityRule {
        SensitivityRule::directional(
            id,
            vec![Premise {
                feature: 0,
                trend: Trend::Increase,
            }],
            Expectation::Increase,
            vec![0],
            0.1,
        )
    }

    #[test]
    fn status_gating() {
        // feature 1 is the WAI status bit
        let on = rule("on").when(Condition::eq(1, 1.0));
        let off = rule("off").when(Condition::eq(1, 0.0));
        let both = rule("both");
        let rules = vec![on, off, both];

        let x_off = [0.5, 0.0];
        let ids: Vec<&str> = applicable_rules(&rules, &x_off).iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["off", "both"]);

        let x_on = [0.5, 1.0];
        let ids: Vec<&str> = applicable_rules(&rules, &x_on).iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["on", "both"]);
    }

    #[test]
    fn ungated_rule_always_applies() {
        assert!(rule("r").applies_to(&[0.0, 0.0]));
        assert!(rule("r").applies_to(&[1e9, -3.0]));
    }

    #[test]
    fn comparison_ops() {
        let x = [2.0];
        assert!(Condition::new(0, CmpOp::Gt, 1.0).holds(&x));
        assert!(!Condition::new(0, CmpOp::Lt, 2.0).holds(&x));
        assert!(Condition::new(0, CmpOp::Le, 2.0).holds(&x));
        assert!(Condition::new(0, CmpOp::Ne, 3.0).holds(&x));
        assert!(Condition::new(0, CmpOp::Ge, 2.0).holds(&x));
    }

    #[test]
    fn expectation_sign_round_trip() {
        for e in [Expectation::Increase, Expectation::Invariant, Expectation::Decrease] {
            assert_eq!(Expectation::from_sign(e.sign()), Some(e));
        }
        assert_eq!(Expectation::from_sign(2), None);
    }
}
