use std::collections::HashSet;

use super::AdversarialExample;

/// Deduplicated examples plus duplicate accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dedup {
    pub unique: Vec<AdversarialExample>,
    pub duplicates: usize,
}

impl Dedup {
    /// Share of input examples that were exact duplicates, in percent.
    pub fn dup_in_pct(&self) -> f64 {
        let total = self.unique.len() + self.duplicates;
        if total == 0 {
            0.0
        } else {
            100.0 * self.duplicates as f64 / total as f64
        }
    }
}

fn bits(v: f64) -> u64 {
    // +0 and −0 are at distance zero
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Keeps the first of every group of examples sharing parent, rule, target and
/// a bit-identical `x_hat`.
pub fn dedup(examples: Vec<AdversarialExample>) -> Dedup {
    let mut seen: HashSet<(usize, String, String, Vec<u64>)> = HashSet::with_capacity(examples.len());
    let mut out = Dedup::default();
    for ax in examples {
        let key = (
            ax.parent_index,
            ax.rule_id.clone(),
            ax.target.clone(),
            ax.x_hat.iter().map(|&v| bits(v)).collect(),
        );
        if seen.insert(key) {
            out.unique.push(ax);
        } else {
            out.duplicates += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::Algorithm;

    fn ax(x: Vec<f64>) -> AdversarialExample {
        AdversarialExample {
            rule_id: "r".into(),
            parent_index: 0,
            x_hat: x,
            target: "y".into(),
            d: 1,
            tol: 0.0,
            fitness: 1.0,
            algorithm: Algorithm::Pso,
            iteration: 0,
            seed: 0,
        }
    }

    #[test]
    fn identical_pair_halves() {
        let mut second = ax(vec![1.0, 2.0]);
        second.iteration = 5;
        let d = dedup(vec![ax(vec![1.0, 2.0]), second]);
        assert_eq!(d.unique.len(), 1);
        assert_eq!(d.unique[0].iteration, 0);
        assert_eq!(d.dup_in_pct(), 50.0);
    }

    #[test]
    fn tiny_difference_is_distinct() {
        let d = dedup(vec![ax(vec![1.0, 2.0]), ax(vec![1.0, 2.0 + 1e-12])]);
        assert_eq!(d.unique.len(), 2);
        assert_eq!(d.dup_in_pct(), 0.0);
    }

    #[test]
    fn empty_input() {
        let d = dedup(vec![]);
        assert!(d.unique.is_empty());
        assert_eq!(d.dup_in_pct(), 0.0);
    }

    #[test]
    fn signed_zero_collapses() {
        let d = dedup(vec![ax(vec![0.0]), ax(vec![-0.0])]);
        assert_eq!(d.unique.len(), 1);
    }

    #[test]
    fn different_rules_are_kept() {
        let mut other = ax(vec![1.0]);
        other.rule_id = "s".into();
        assert_eq!(dedup(vec![ax(vec![1.0]), other]).unique.len(), 2);
    }
}
