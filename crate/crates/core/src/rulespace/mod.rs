//! Sensitivity rules, per-anchor search spaces and foreseeable-condition
//! envelopes.

mod envelope;
mod rule;
mod space;

pub use envelope::{is_valid, Breakpoint, ConditionalLimit, Envelope, PairConstraint, Validity};
pub use rule::{
    applicable_rules, CmpOp, Condition, Expectation, Premise, Radius, SensitivityRule, Trend,
};
pub use space::{derive_search_space, Dim, SearchSpace, PREMISE_GAP};
