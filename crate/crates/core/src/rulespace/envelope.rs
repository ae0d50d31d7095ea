use crate::error::{invalid, Result};

use super::rule::Condition;

/// One breakpoint of a piecewise-linear envelope: at `a`, feature b must lie
/// in `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub a: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Piecewise-linear bounds of feature `b` as a function of feature `a`.
/// Points with `a` outside the breakpoint span violate the constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConstraint {
    pub id: String,
    pub a: usize,
    pub b: usize,
    pub breakpoints: Vec<Breakpoint>,
}

impl PairConstraint {
    pub fn new(id: impl Into<String>, a: usize, b: usize, breakpoints: Vec<Breakpoint>) -> Result<Self> {
        let id = id.into();
        if breakpoints.is_empty() {
            return Err(invalid(format!("pair constraint `{id}`: no breakpoints")));
        }
        if breakpoints.windows(2).any(|w| !(w[0].a < w[1].a)) {
            return Err(invalid(format!("pair constraint `{id}`: breakpoints must be strictly increasing")));
        }
        if breakpoints.iter().any(|p| !(p.lower <= p.upper)) {
            return Err(invalid(format!("pair constraint `{id}`: lower > upper at a breakpoint")));
        }
        Ok(Self { id, a, b, breakpoints })
    }

    /// Interpolated `(lower, upper)` bounds of b at `a`, or `None` outside the span.
    pub fn bounds_at(&self, a: f64) -> Option<(f64, f64)> {
        let bp = &self.breakpoints;
        let first = bp.first()?;
        let last = bp.last()?;
        if !(a >= first.a && a <= last.a) {
            return None;
        }
        if bp.len() == 1 {
            return Some((first.lower, first.upper));
        }
        // index of the first breakpoint with bp.a > a, clamped to a valid segment
        let k = bp.partition_point(|p| p.a <= a).clamp(1, bp.len() - 1);
        let (p, q) = (bp[k - 1], bp[k]);
        let t = (a - p.a) / (q.a - p.a);
        Some((p.lower + t * (q.lower - p.lower), p.upper + t * (q.upper - p.upper)))
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        match self.bounds_at(x[self.a]) {
            Some((lo, hi)) => x[self.b] >= lo && x[self.b] <= hi,
            None => false,
        }
    }
}

/// Bound on a feature that applies only when all `when` conditions hold,
/// e.g. a speed limit with high-lift devices extended.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLimit {
    pub id: String,
    pub when: Vec<Condition>,
    pub feature: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ConditionalLimit {
    pub fn holds(&self, x: &[f64]) -> bool {
        if !self.when.iter().all(|c| c.holds(x)) {
            return true;
        }
        let v = x[self.feature];
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

/// Foreseeable operating conditions a generated input must satisfy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Envelope {
    pub pairs: Vec<PairConstraint>,
    pub limits: Vec<ConditionalLimit>,
}

/// Outcome of [`Envelope::check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validity {
    pub valid: bool,
    pub violated: Vec<String>,
}

impl Envelope {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.limits.is_empty()
    }

    pub fn is_valid(&self, x: &[f64]) -> bool {
        self.pairs.iter().all(|p| p.holds(x)) && self.limits.iter().all(|l| l.holds(x))
    }

    /// Validity plus the ids of every violated constraint.
    pub fn check(&self, x: &[f64]) -> Validity {
        let violated: Vec<String> = self
            .pairs
            .iter()
            .filter(|p| !p.holds(x))
            .map(|p| p.id.clone())
            .chain(self.limits.iter().filter(|l| !l.holds(x)).map(|l| l.id.clone()))
            .collect();
        Validity {
            valid: violated.is_empty(),
            violated,
        }
    }

    /// Highest feature index referenced, for schema cross-checks.
    pub fn max_feature(&self) -> Option<usize> {
        self.pairs
            .iter()
            .flat_map(|p| [p.a, p.b])
            .chain(
                self.limits
                    .iter()
                    .flat_map(|l| std::iter::once(l.feature).chain(l.when.iter().map(|c| c.feature))),
            )
            .max()
    }
}

/// `(valid, violated ids)` for `x` against `constraints`.
pub fn is_valid(x: &[f64], constraints: &Envelope) -> (bool, Vec<String>) {
    let v = constraints.check(x);
    (v.valid, v.violated)
}
