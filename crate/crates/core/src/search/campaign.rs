use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dedup, deviation_value, run_search, AdversarialExample, Algorithm, SearchParams, SearchProblem};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::PredictiveModel;
use crate::physreg::{AxStore, Provenance};
use crate::rulespace::{derive_search_space, Envelope, SensitivityRule};

/// Per-rule accounting of a campaign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    #[serde(rename = "type")]
    pub kind: String,
    /// Anchors where the applicability predicate held.
    pub applicable: usize,
    pub searches: usize,
    /// Anchors whose derived space was empty.
    pub skipped: usize,
    pub failed: usize,
    pub generated: usize,
    pub valid: usize,
    pub adv_total: usize,
    pub adv_unique: usize,
}

/// An (anchor, rule) pair that produced no search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub anchor: usize,
    pub rule_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub anchors: usize,
    pub searches: usize,
    pub generated: usize,
    pub valid: usize,
    pub val_in_pct: f64,
    /// Captured examples before deduplication.
    pub adv_total: usize,
    /// Unique examples (#AdvIn).
    pub adv_in: usize,
    pub dup_in_pct: f64,
    /// Unique examples per rule type (`incr`, `cons`, `decr`).
    pub adv_in_by_type: BTreeMap<String, usize>,
    pub per_rule: BTreeMap<String, RuleStats>,
    pub skips: Vec<Skip>,
    pub failures: Vec<Skip>,
}

/// Stable per-search seed from the campaign seed and the search coordinates.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    // splitmix64 finalizer applied to a running combination
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = h.wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[derive(Default)]
struct AnchorResult {
    examples: Vec<AdversarialExample>,
    rules: Vec<RuleStats>,
    skips: Vec<Skip>,
    failures: Vec<Skip>,
}

fn search_anchor<M: PredictiveModel + ?Sized>(
    model: &M,
    anchors: &Dataset,
    fx: &[f64],
    i: usize,
    rules: &[SensitivityRule],
    envelope: &Envelope,
    params: &SearchParams,
) -> AnchorResult {
    let x = anchors.inputs().row(i);
    let schema = &anchors.schema;
    let mut res = AnchorResult {
        rules: vec![RuleStats::default(); rules.len()],
        ..Default::default()
    };
    for (j, rule) in rules.iter().enumerate() {
        if !rule.applies_to(x) {
            continue;
        }
        let rs = &mut res.rules[j];
        rs.applicable += 1;
        let space = match derive_search_space(rule, x, &schema.features) {
            Ok(s) => s,
            Err(Error::EmptyInterval { .. }) => {
                rs.skipped += 1;
                res.skips.push(Skip {
                    anchor: i,
                    rule_id: rule.id.clone(),
                    reason: "empty search space".into(),
                });
                continue;
            }
            Err(e) => {
                rs.failed += 1;
                res.failures.push(Skip {
                    anchor: i,
                    rule_id: rule.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        for &t in &rule.targets {
            let f_anchor = fx[t];
            let expect = rule.expect;
            let fitness = |m: &Matrix| -> Result<Vec<f64>> {
                let y = model.predict(m)?;
                Ok((0..y.rows()).map(|r| deviation_value(expect, f_anchor, y.get(r, t))).collect())
            };
            let validity = |c: &[f64]| envelope.is_valid(c);
            let problem = SearchProblem {
                space: &space,
                fitness: &fitness,
                validity: &validity,
                tol: rule.tol,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[i as u64, j as u64, t as u64]));
            rs.searches += 1;
            match run_search(&problem, params, &mut rng) {
                Ok(out) => {
                    rs.generated += out.generated;
                    rs.valid += out.valid;
                    rs.adv_total += out.captures.len();
                    let target = schema.targets[t].clone();
                    res.examples.extend(out.captures.into_iter().map(|c| AdversarialExample {
                        rule_id: rule.id.clone(),
                        parent_index: i,
                        x_hat: c.x_hat,
                        target: target.clone(),
                        d: expect.sign(),
                        tol: rule.tol,
                        fitness: c.fitness,
                        algorithm: params.algorithm,
                        iteration: c.iteration,
                        seed: params.seed,
                    }));
                }
                Err(e) => {
                    rs.failed += 1;
                    res.failures.push(Skip {
                        anchor: i,
                        rule_id: rule.id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    res
}

/// Searches every (anchor, applicable rule, target) triple for adversarial
/// examples. Searches run in parallel; results are merged in anchor order so
/// the store depends only on the inputs and `params.seed`. Per-search errors
/// are recorded in the stats and do not abort the campaign.
pub fn run_campaign<M: PredictiveModel + ?Sized>(
    model: &M,
    anchors: &Dataset,
    rules: &[SensitivityRule],
    envelope: &Envelope,
    params: &SearchParams,
) -> Result<(AxStore, CampaignStats)> {
    params.validate()?;
    for r in rules {
        r.validate(&anchors.schema)?;
    }
    let fx = model.predict(anchors.inputs())?;
    if !fx.is_finite() {
        return Err(Error::NonFiniteOutput);
    }
    let results: Vec<AnchorResult> = (0..anchors.len())
        .into_par_iter()
        .map(|i| search_anchor(model, anchors, fx.row(i), i, rules, envelope, params))
        .collect();

    let mut per_rule: Vec<RuleStats> = rules
        .iter()
        .map(|r| RuleStats {
            kind: r.expect.label().to_string(),
            ..Default::default()
        })
        .collect();
    let mut all = Vec::new();
    let mut skips = Vec::new();
    let mut failures = Vec::new();
    for res in results {
        for (acc, s) in per_rule.iter_mut().zip(&res.rules) {
            acc.applicable += s.applicable;
            acc.searches += s.searches;
            acc.skipped += s.skipped;
            acc.failed += s.failed;
            acc.generated += s.generated;
            acc.valid += s.valid;
            acc.adv_total += s.adv_total;
        }
        all.extend(res.examples);
        skips.extend(res.skips);
        failures.extend(res.failures);
    }
    for f in &failures {
        log::warn!("search failed at anchor {} rule `{}`: {}", f.anchor, f.rule_id, f.reason);
    }

    let adv_total = all.len();
    let d = dedup(all);
    let dup_in_pct = d.dup_in_pct();
    let mut by_type: BTreeMap<String, usize> = ["incr", "cons", "decr"].iter().map(|k| (k.to_string(), 0)).collect();
    let index: BTreeMap<&str, usize> = rules.iter().enumerate().map(|(j, r)| (r.id.as_str(), j)).collect();
    for ax in &d.unique {
        *by_type.entry(ax.expectation().label().to_string()).or_default() += 1;
        if let Some(&j) = index.get(ax.rule_id.as_str()) {
            per_rule[j].adv_unique += 1;
        }
    }
    let generated: usize = per_rule.iter().map(|r| r.generated).sum();
    let valid: usize = per_rule.iter().map(|r| r.valid).sum();
    let stats = CampaignStats {
        algorithm: params.algorithm,
        seed: params.seed,
        anchors: anchors.len(),
        searches: per_rule.iter().map(|r| r.searches).sum(),
        generated,
        valid,
        val_in_pct: if generated == 0 { 0.0 } else { 100.0 * valid as f64 / generated as f64 },
        adv_total,
        adv_in: d.unique.len(),
        dup_in_pct,
        adv_in_by_type: by_type,
        per_rule: rules.iter().map(|r| r.id.clone()).zip(per_rule).collect(),
        skips,
        failures,
    };
    let store = AxStore::new(
        d.unique,
        Provenance {
            model: None,
            campaign_seed: Some(params.seed),
        },
    );
    Ok((store, stats))
}

/// Re-checks the three membership conditions of a stored example against the
/// anchor set, rules, envelope and model: valid, inside the rule's space, and
/// deviation above tolerance.
pub fn reverify<M: PredictiveModel + ?Sized>(
    ax: &AdversarialExample,
    model: &M,
    anchors: &Dataset,
    rules: &[SensitivityRule],
    envelope: &Envelope,
) -> Result<bool> {
    let rule = rules
        .iter()
        .find(|r| r.id == ax.rule_id)
        .ok_or_else(|| Error::Config(format!("unknown rule `{}`", ax.rule_id)))?;
    if ax.parent_index >= anchors.len() {
        return Err(Error::OrphanAdversarial(ax.parent_index));
    }
    let t = anchors
        .schema
        .target_index(&ax.target)
        .ok_or_else(|| Error::MissingColumn(ax.target.clone()))?;
    let x = anchors.inputs().row(ax.parent_index);
    let space = match derive_search_space(rule, x, &anchors.schema.features) {
        Ok(s) => s,
        Err(Error::EmptyInterval { .. } | Error::NotApplicable { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    if !space.contains(&ax.x_hat) || !envelope.is_valid(&ax.x_hat) {
        return Ok(false);
    }
    let dev = super::deviation(model, rule.expect, x, &ax.x_hat, t)?;
    Ok(dev > rule.tol)
}
