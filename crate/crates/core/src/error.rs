use std::fmt;

use thiserror::Error;

/// A single out-of-range cell found while validating a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeViolation {
    /// Zero-based data row (header excluded).
    pub row: usize,
    pub feature: String,
    pub value: f64,
}

impl fmt::Display for RangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {} feature `{}` = {}", self.row, self.feature, self.value)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("range violation in {} row(s): {}", .0.len(), fmt_violations(.0))]
    RangeViolation(Vec<RangeViolation>),

    #[error("zero variance in column {0}")]
    ZeroVariance(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input at row {row}, column {column}")]
    NonFiniteInput { row: usize, column: usize },

    #[error("model output not finite")]
    NonFiniteOutput,

    #[error("divergence: loss became NaN at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("non-finite {term} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        term: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("rule `{rule}`: empty interval for feature `{feature}`")]
    EmptyInterval { rule: String, feature: String },

    #[error("rule `{rule}` is not applicable at this anchor")]
    NotApplicable { rule: String },

    #[error("adversarial example references parent {0} absent from the batch")]
    OrphanAdversarial(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_violations(v: &[RangeViolation]) -> String {
    const SHOWN: usize = 5;
    let mut parts: Vec<String> = v.iter().take(SHOWN).map(|x| x.to_string()).collect();
    if v.len() > SHOWN {
        parts.push(format!("... and {} more", v.len() - SHOWN));
    }
    parts.join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
