//! Name-based file formats for rules, envelopes and augmentation rules, and
//! their resolution against a schema.

use std::path::Path;

use physadv_core::physreg::{Assign, Edit};
use physadv_core::rulespace::{
    Breakpoint, CmpOp, Condition, ConditionalLimit, Expectation, PairConstraint, Premise, Radius, Trend,
};
use physadv_core::{AugmentationRule, Envelope, FeatureKind, Schema, SensitivityRule};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliResult};

/// A cell value as written by people: a number, or a level name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDecl {
    pub feature: String,
    pub op: CmpOp,
    pub value: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiseDecl {
    pub feature: String,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusDecl {
    pub feature: String,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDecl {
    pub id: String,
    pub expect: Expectation,
    pub targets: Vec<String>,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<ConditionDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub premises: Vec<PremiseDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<RadiusDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesFile {
    #[serde(default, rename = "rule", skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDecl {
    pub id: String,
    /// Independent feature.
    pub a: String,
    /// Bounded feature.
    pub b: String,
    /// `[a, lower, upper]` triples.
    pub breakpoints: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitDecl {
    pub id: String,
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<ConditionDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeFile {
    #[serde(default, rename = "pair", skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairDecl>,
    #[serde(default, rename = "limit", skip_serializing_if = "Vec::is_empty")]
    pub limits: Vec<LimitDecl>,
}

/// One cell edit: exactly one of `shift`, `value` or `copy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditDecl {
    pub column: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shift: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Cell>,
    /// Feature whose (edited) value is copied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationDecl {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<ConditionDecl>,
    #[serde(default)]
    pub inputs: Vec<EditDecl>,
    #[serde(default)]
    pub targets: Vec<EditDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationFile {
    #[serde(default, rename = "augmentation", skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<AugmentationDecl>,
}

/// Reads and parses a TOML file; parse errors carry the path and line.
pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Looks names up in a schema, naming the file and owner on failure.
pub struct Resolver<'a> {
    pub schema: &'a Schema,
    pub file: &'a str,
}

impl Resolver<'_> {
    fn feature(&self, owner: &str, name: &str) -> CliResult<usize> {
        self.schema.feature_index(name).ok_or_else(|| {
            config_err(format!("{}: {owner} references feature `{name}` absent from the schema", self.file))
        })
    }

    fn target(&self, owner: &str, name: &str) -> CliResult<usize> {
        self.schema.target_index(name).ok_or_else(|| {
            config_err(format!("{}: {owner} references target `{name}` absent from the schema", self.file))
        })
    }

    fn cell(&self, owner: &str, feature: usize, cell: &Cell) -> CliResult<f64> {
        let meta = &self.schema.features[feature];
        let text = match cell {
            Cell::Number(v) if matches!(meta.kind, FeatureKind::Real { .. }) => return Ok(*v),
            Cell::Number(v) => format!("{v}"),
            Cell::Text(t) => t.clone(),
        };
        meta.encode(&text).filter(|v| v.is_finite()).ok_or_else(|| {
            config_err(format!("{}: {owner}: `{text}` is not a value of feature `{}`", self.file, meta.name))
        })
    }

    fn condition(&self, owner: &str, c: &ConditionDecl) -> CliResult<Condition> {
        let f = self.feature(owner, &c.feature)?;
        Ok(Condition::new(f, c.op, self.cell(owner, f, &c.value)?))
    }

    pub fn rules(&self, file: &RulesFile) -> CliResult<Vec<SensitivityRule>> {
        let mut out = Vec::with_capacity(file.rules.len());
        for r in &file.rules {
            let owner = format!("rule `{}`", r.id);
            let targets = r.targets.iter().map(|t| self.target(&owner, t)).collect::<CliResult<Vec<_>>>()?;
            let mut rule = if r.expect == Expectation::Invariant {
                let radii = r
                    .radii
                    .iter()
                    .map(|d| {
                        Ok(Radius {
                            feature: self.feature(&owner, &d.feature)?,
                            radius: d.radius,
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                SensitivityRule::invariant(&r.id, radii, targets, r.tol)
            } else {
                let premises = r
                    .premises
                    .iter()
                    .map(|p| {
                        Ok(Premise {
                            feature: self.feature(&owner, &p.feature)?,
                            trend: p.trend,
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                SensitivityRule::directional(&r.id, premises, r.expect, targets, r.tol)
            };
            for c in &r.when {
                rule = rule.when(self.condition(&owner, c)?);
            }
            rule.validate(self.schema)
                .map_err(|e| config_err(format!("{}: {owner}: {e}", self.file)))?;
            out.push(rule);
        }
        Ok(out)
    }

    pub fn envelope(&self, file: &EnvelopeFile) -> CliResult<Envelope> {
        let mut env = Envelope::default();
        for p in &file.pairs {
            let owner = format!("pair `{}`", p.id);
            let breakpoints = p
                .breakpoints
                .iter()
                .map(|&[a, lower, upper]| Breakpoint { a, lower, upper })
                .collect();
            let pair = PairConstraint::new(&p.id, self.feature(&owner, &p.a)?, self.feature(&owner, &p.b)?, breakpoints)
                .map_err(|e| config_err(format!("{}: {e}", self.file)))?;
            env.pairs.push(pair);
        }
        for l in &file.limits {
            let owner = format!("limit `{}`", l.id);
            env.limits.push(ConditionalLimit {
                id: l.id.clone(),
                when: l.when.iter().map(|c| self.condition(&owner, c)).collect::<CliResult<_>>()?,
                feature: self.feature(&owner, &l.feature)?,
                min: l.min,
                max: l.max,
            });
        }
        Ok(env)
    }

    pub fn augmentation(&self, file: &AugmentationFile) -> CliResult<Vec<AugmentationRule>> {
        let mut out = Vec::with_capacity(file.rules.len());
        for a in &file.rules {
            let owner = format!("augmentation `{}`", a.id);
            let edit = |e: &EditDecl, target: bool| -> CliResult<Edit> {
                let index = if target {
                    self.target(&owner, &e.column)?
                } else {
                    self.feature(&owner, &e.column)?
                };
                let assign = match (e.shift, &e.value, &e.copy) {
                    (true, None, None) => Assign::ShiftByT,
                    (false, Some(Cell::Number(v)), None) if target => Assign::Value(*v),
                    (false, Some(v), None) if !target => Assign::Value(self.cell(&owner, index, v)?),
                    (false, None, Some(f)) => Assign::Feature(self.feature(&owner, f)?),
                    _ => {
                        return Err(config_err(format!(
                            "{}: {owner}: edit of `{}` needs exactly one of shift, value or copy",
                            self.file, e.column
                        )))
                    }
                };
                Ok(Edit { index, assign })
            };
            let rule = AugmentationRule {
                id: a.id.clone(),
                when: a.when.iter().map(|c| self.condition(&owner, c)).collect::<CliResult<_>>()?,
                range: a.range.map(|[lo, hi]| (lo, hi)),
                inputs: a.inputs.iter().map(|e| edit(e, false)).collect::<CliResult<_>>()?,
                targets: a.targets.iter().map(|e| edit(e, true)).collect::<CliResult<_>>()?,
            };
            rule.validate(self.schema)
                .map_err(|e| config_err(format!("{}: {owner}: {e}", self.file)))?;
            out.push(rule);
        }
        Ok(out)
    }
}

fn cell_of(schema: &Schema, feature: usize, v: f64) -> Cell {
    let meta = &schema.features[feature];
    match meta.kind {
        FeatureKind::Real { .. } => Cell::Number(v),
        _ => Cell::Text(meta.decode(v)),
    }
}

fn condition_decl(schema: &Schema, c: &Condition) -> ConditionDecl {
    ConditionDecl {
        feature: schema.features[c.feature].name.clone(),
        op: c.op,
        value: cell_of(schema, c.feature, c.value),
    }
}

pub fn rules_decl(schema: &Schema, rules: &[SensitivityRule]) -> RulesFile {
    let fname = |i: usize| schema.features[i].name.clone();
    RulesFile {
        rules: rules
            .iter()
            .map(|r| RuleDecl {
                id: r.id.clone(),
                expect: r.expect,
                targets: r.targets.iter().map(|&t| schema.targets[t].clone()).collect(),
                tol: r.tol,
                when: r.applicability.iter().map(|c| condition_decl(schema, c)).collect(),
                premises: r
                    .premises
                    .iter()
                    .map(|p| PremiseDecl {
                        feature: fname(p.feature),
                        trend: p.trend,
                    })
                    .collect(),
                radii: r
                    .radii
                    .iter()
                    .map(|d| RadiusDecl {
                        feature: fname(d.feature),
                        radius: d.radius,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn envelope_decl(schema: &Schema, env: &Envelope) -> EnvelopeFile {
    let fname = |i: usize| schema.features[i].name.clone();
    EnvelopeFile {
        pairs: env
            .pairs
            .iter()
            .map(|p| PairDecl {
                id: p.id.clone(),
                a: fname(p.a),
                b: fname(p.b),
                breakpoints: p.breakpoints.iter().map(|b| [b.a, b.lower, b.upper]).collect(),
            })
            .collect(),
        limits: env
            .limits
            .iter()
            .map(|l| LimitDecl {
                id: l.id.clone(),
                feature: fname(l.feature),
                min: l.min,
                max: l.max,
                when: l.when.iter().map(|c| condition_decl(schema, c)).collect(),
            })
            .collect(),
    }
}

pub fn augmentation_decl(schema: &Schema, rules: &[AugmentationRule]) -> AugmentationFile {
    let edit = |e: &Edit, target: bool| {
        let column = if target {
            schema.targets[e.index].clone()
        } else {
            schema.features[e.index].name.clone()
        };
        let mut d = EditDecl {
            column,
            shift: false,
            value: None,
            copy: None,
        };
        match e.assign {
            Assign::ShiftByT => d.shift = true,
            Assign::Value(v) if target => d.value = Some(Cell::Number(v)),
            Assign::Value(v) => d.value = Some(cell_of(schema, e.index, v)),
            Assign::Feature(f) => d.copy = Some(schema.features[f].name.clone()),
        }
        d
    };
    AugmentationFile {
        rules: rules
            .iter()
            .map(|a| AugmentationDecl {
                id: a.id.clone(),
                range: a.range.map(|(lo, hi)| [lo, hi]),
                when: a.when.iter().map(|c| condition_decl(schema, c)).collect(),
                inputs: a.inputs.iter().map(|e| edit(e, false)).collect(),
                targets: a.targets.iter().map(|e| edit(e, true)).collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use physadv_core::harness::{case_definition, CaseName};

    fn round_trip(name: CaseName) {
        let case = case_definition(name);
        let r = Resolver {
            schema: &case.schema,
            file: "test",
        };
        let rules = rules_decl(&case.schema, &case.rules);
        let text = toml::to_string(&rules).unwrap();
        assert_eq!(r.rules(&toml::from_str(&text).unwrap()).unwrap(), case.rules);
        let env = envelope_decl(&case.schema, &case.envelope);
        let text = toml::to_string(&env).unwrap();
        assert_eq!(r.envelope(&toml::from_str(&text).unwrap()).unwrap(), case.envelope);
        let aug = augmentation_decl(&case.schema, &case.augmentation);
        let text = toml::to_string(&aug).unwrap();
        assert_eq!(r.augmentation(&toml::from_str(&text).unwrap()).unwrap(), case.augmentation);
    }

    #[test]
    fn bundled_cases_round_trip() {
        round_trip(CaseName::LiftBalance);
        round_trip(CaseName::HeatBalance);
    }

    #[test]
    fn unknown_feature_names_rule_and_feature() {
        let case = case_definition(CaseName::LiftBalance);
        let file: RulesFile = toml::from_str(
            r#"
            [[rule]]
            id = "rX"
            expect = "increase"
            targets = ["AoA"]
            tol = 0.1
            premises = [{ feature = "MACH", trend = "increase" }]
            "#,
        )
        .unwrap();
        let err = Resolver {
            schema: &case.schema,
            file: "rules.toml",
        }
        .rules(&file)
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rX") && msg.contains("MACH") && msg.contains("rules.toml"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn edit_needs_one_action() {
        let case = case_definition(CaseName::HeatBalance);
        let file: AugmentationFile = toml::from_str(
            r#"
            [[augmentation]]
            id = "bad"
            inputs = [{ column = "PWR", shift = true, value = 0.0 }]
            "#,
        )
        .unwrap();
        let r = Resolver {
            schema: &case.schema,
            file: "aug.toml",
        };
        assert!(r.augmentation(&file).is_err());
    }
}
