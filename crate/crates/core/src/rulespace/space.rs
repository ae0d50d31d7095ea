use rand::Rng;

use super::rule::{Expectation, SensitivityRule, Trend};
use crate::data::FeatureMeta;
use crate::error::{Error, Result};

/// Relative gap enforcing strict change on premise features.
pub const PREMISE_GAP: f64 = 1e-9;

/// Admissible values of one feature inside a search space.
#[derive(Debug, Clone, PartialEq)]
pub enum Dim {
    /// Closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Admissible encoded levels, ascending, non-empty.
    Levels(Vec<f64>),
}

impl Dim {
    pub fn contains(&self, v: f64) -> bool {
        match self {
            Dim::Interval { lo, hi } => v >= *lo && v <= *hi,
            Dim::Levels(levels) => levels.contains(&v),
        }
    }

    /// Bounds of the continuous gene that encodes this dimension.
    /// A level set of size `k` is encoded by a gene in `[0, k]`.
    pub fn gene_bounds(&self) -> (f64, f64) {
        match self {
            Dim::Interval { lo, hi } => (*lo, *hi),
            Dim::Levels(levels) => (0.0, levels.len() as f64),
        }
    }

    pub fn decode(&self, gene: f64) -> f64 {
        match self {
            Dim::Interval { lo, hi } => gene.clamp(*lo, *hi),
            Dim::Levels(levels) => {
                let k = levels.len();
                let i = if gene <= 0.0 { 0 } else { (gene as usize).min(k - 1) };
                levels[i]
            }
        }
    }

    pub fn is_pinned(&self) -> bool {
        match self {
            Dim::Interval { lo, hi } => lo == hi,
            Dim::Levels(levels) => levels.len() == 1,
        }
    }
}

/// Local input space derived from a rule around an anchor datapoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
    pub anchor: Vec<f64>,
    /// Premise features that could actually move (discrete premises with no
    /// admissible level in the premise direction are dropped).
    pub active_premises: Vec<(usize, Trend)>,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(d, &v)| d.contains(v))
    }

    pub fn gene_bounds(&self) -> Vec<(f64, f64)> {
        self.dims.iter().map(Dim::gene_bounds).collect()
    }

    pub fn decode(&self, genes: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(genes).map(|(d, &g)| d.decode(g)).collect()
    }

    /// Uniform gene vector; decodes to a uniform point of the space.
    pub fn sample_genes<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims
            .iter()
            .map(|d| {
                let (lo, hi) = d.gene_bounds();
                lo + rng.gen::<f64>() * (hi - lo)
            })
            .collect()
    }
}

fn band(meta: &FeatureMeta, x: f64, radius: f64) -> Dim {
    match meta.levels() {
        None => {
            let (m, mx) = meta.bounds();
            Dim::Interval {
                lo: m.max(x - radius),
                hi: mx.min(x + radius),
            }
        }
        Some(levels) => {
            let mut inside: Vec<f64> = levels.into_iter().filter(|l| (l - x).abs() <= radius).collect();
            if inside.is_empty() {
                inside.push(x);
            }
            Dim::Levels(inside)
        }
    }
}

/// Instantiates the local search space of `rule` around anchor `x`.
///
/// Directional rules: premise features move strictly in their direction up to
/// the feature range, the remaining features stay within their tolerance band
/// intersected with the range. Invariance rules: the listed features get their
/// radius band, all others are pinned to the anchor.
pub fn derive_search_space(rule: &SensitivityRule, x: &[f64], meta: &[FeatureMeta]) -> Result<SearchSpace> {
    if x.len() != meta.len() {
        return Err(Error::DimensionMismatch {
            expected: meta.len(),
            got: x.len(),
        });
    }
    if !rule.applies_to(x) {
        return Err(Error::NotApplicable { rule: rule.id.clone() });
    }
    let empty = |f: usize| Error::EmptyInterval {
        rule: rule.id.clone(),
        feature: meta[f].name.clone(),
    };

    if rule.expect == Expectation::Invariant {
        let mut dims: Vec<Dim> = meta.iter().zip(x).map(|(m, &v)| band(m, v, 0.0)).collect();
        for r in &rule.radii {
            dims[r.feature] = band(&meta[r.feature], x[r.feature], r.radius);
        }
        return Ok(SearchSpace {
            dims,
            anchor: x.to_vec(),
            active_premises: Vec::new(),
        });
    }

    let mut dims: Vec<Dim> = meta.iter().zip(x).map(|(m, &v)| band(m, v, m.tol)).collect();
    let mut active = Vec::new();
    for p in &rule.premises {
        let f = &meta[p.feature];
        let v = x[p.feature];
        match f.levels() {
            None => {
                let (m, mx) = f.bounds();
                let gap = PREMISE_GAP * (mx - m);
                let (lo, hi) = match p.trend {
                    Trend::Increase => (v + gap, mx),
                    Trend::Decrease => (m, v - gap),
                };
                if lo > hi {
                    return Err(empty(p.feature));
                }
                dims[p.feature] = Dim::Interval { lo, hi };
                active.push((p.feature, p.trend));
            }
            Some(levels) => {
                let moved: Vec<f64> = levels
                    .into_iter()
                    .filter(|&l| match p.trend {
                        Trend::Increase => l > v,
                        Trend::Decrease => l < v,
                    })
                    .collect();
                // a discrete premise that cannot move is dropped for this anchor
                if !moved.is_empty() {
                    dims[p.feature] = Dim::Levels(moved);
                    active.push((p.feature, p.trend));
                }
            }
        }
    }
    if active.is_empty() {
        return Err(empty(rule.premises[0].feature));
    }
    Ok(SearchSpace {
        dims,
        anchor: x.to_vec(),
        active_premises: active,
    })
}
