//! Feature metadata, datasets and CSV loading.
//!
//! Discrete features live in the same numeric space as real ones: dichotomous
//! features are encoded as `0.0`/`1.0`, categorical features as the index of
//! their level in the declared (ordered) level list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, RangeViolation, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Real { min: f64, max: f64 },
    Dichotomous,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    /// Tolerated measurement deviation, in feature units.
    #[serde(default)]
    pub tol: f64,
}

impl FeatureMeta {
    pub fn real(name: impl Into<String>, min: f64, max: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Real { min, max },
            tol,
        }
    }

    pub fn dichotomous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Dichotomous,
            tol: 0.0,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
            tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("feature `{}`: tolerance must be finite and >= 0", self.name)));
        }
        match &self.kind {
            FeatureKind::Real { min, max } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(invalid(format!("feature `{}`: range requires min < max", self.name)));
                }
            }
            FeatureKind::Dichotomous => {}
            FeatureKind::Categorical { levels } => {
                if levels.is_empty() {
                    return Err(invalid(format!("feature `{}`: empty level set", self.name)));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, FeatureKind::Real { .. })
    }

    /// Full range `[m, M]` in encoded units.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            FeatureKind::Real { min, max } => (*min, *max),
            FeatureKind::Dichotomous => (0.0, 1.0),
            FeatureKind::Categorical { levels } => (0.0, (levels.len() - 1) as f64),
        }
    }

    /// Admissible encoded values for discrete features, ascending.
    pub fn levels(&self) -> Option<Vec<f64>> {
        match &self.kind {
            FeatureKind::Real { .. } => None,
            FeatureKind::Dichotomous => Some(vec![0.0, 1.0]),
            FeatureKind::Categorical { levels } => Some((0..levels.len()).map(|i| i as f64).collect()),
        }
    }

    pub fn admits(&self, v: f64) -> bool {
        match &self.kind {
            FeatureKind::Real { min, max } => v >= *min && v <= *max,
            FeatureKind::Dichotomous => v == 0.0 || v == 1.0,
            FeatureKind::Categorical { levels } => v >= 0.0 && v.fract() == 0.0 && (v as usize) < levels.len(),
        }
    }

    /// Parses a raw CSV cell into the encoded value. `None` when the cell is not
    /// a number (or, for discrete features, not a recognised level).
    pub fn encode(&self, cell: &str) -> Option<f64> {
        let cell = cell.trim();
        match &self.kind {
            FeatureKind::Real { .. } => cell.parse::<f64>().ok().filter(|v| v.is_finite()),
            FeatureKind::Dichotomous => match cell.to_ascii_lowercase().as_str() {
                "1" | "1.0" | "true" | "on" => Some(1.0),
                "0" | "0.0" | "false" | "off" => Some(0.0),
                other => other.parse::<f64>().ok().filter(|v| v.is_finite()),
            },
            FeatureKind::Categorical { levels } => {
                if let Some(i) = levels.iter().position(|l| l == cell) {
                    return Some(i as f64);
                }
                let num = cell.parse::<f64>().ok()?;
                levels
                    .iter()
                    .position(|l| l.parse::<f64>().map(|lv| lv == num).unwrap_or(false))
                    .map(|i| i as f64)
                    // an unknown numeric level is still numeric: let range validation report it
                    .or(Some(f64::NAN))
            }
        }
    }

    /// Inverse of [`FeatureMeta::encode`], used when writing CSV.
    pub fn decode(&self, v: f64) -> String {
        match &self.kind {
            FeatureKind::Real { .. } => format!("{v}"),
            FeatureKind::Dichotomous => format!("{}", v as i64),
            FeatureKind::Categorical { levels } => levels
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("{v}")),
        }
    }
}

/// Feature and target declaration of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureMeta>,
    pub targets: Vec<String>,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(invalid("schema declares no features"));
        }
        if self.targets.is_empty() {
            return Err(invalid("schema declares no targets"));
        }
        for f in &self.features {
            f.validate()?;
        }
        let mut names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        names.extend(self.targets.iter().map(String::as_str));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate column `{}` in schema", w[0])));
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn target_index(&self, name: &str) -> Option<usize> {
        self.targets.iter().position(|t| t == name)
    }

    pub fn input_dim(&self) -> usize {
        self.features.len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.len()
    }

    /// Every out-of-schema cell of `row`, tagged with `row_index`.
    pub fn violations(&self, row_index: usize, row: &[f64]) -> Vec<RangeViolation> {
        self.features
            .iter()
            .zip(row)
            .filter(|(f, &v)| !f.admits(v))
            .map(|(f, &v)| RangeViolation {
                row: row_index,
                feature: f.name.clone(),
                value: v,
            })
            .collect()
    }

    pub fn admits_row(&self, row: &[f64]) -> bool {
        row.len() == self.features.len() && self.features.iter().zip(row).all(|(f, &v)| f.admits(v))
    }
}

/// Validated regression dataset: `inputs` is N×D, `outputs` N×T.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    inputs: Matrix,
    outputs: Matrix,
}

impl Dataset {
    /// Validates every row against the schema. Fails with all violations listed.
    pub fn new(schema: Schema, inputs: Matrix, outputs: Matrix) -> Result<Self> {
        schema.validate()?;
        if inputs.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if inputs.cols() != schema.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: schema.input_dim(),
                got: inputs.cols(),
            });
        }
        if outputs.cols() != schema.output_dim() || outputs.rows() != inputs.rows() {
            return Err(Error::DimensionMismatch {
                expected: schema.output_dim(),
                got: outputs.cols(),
            });
        }
        let violations: Vec<RangeViolation> = inputs
            .iter_rows()
            .enumerate()
            .flat_map(|(i, row)| schema.violations(i, row))
            .collect();
        if !violations.is_empty() {
            return Err(Error::RangeViolation(violations));
        }
        if let Some((r, c)) = first_non_finite(&outputs) {
            return Err(Error::NonFiniteInput { row: r, column: c });
        }
        Ok(Self {
            schema,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn outputs(&self) -> &Matrix {
        &self.outputs
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.schema.features
    }

    /// Rows at `indices`, in order. Panics on an out-of-bounds index.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            schema: self.schema.clone(),
            inputs: self.inputs.select_rows(indices),
            outputs: self.outputs.select_rows(indices),
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<&str> = self
            .schema
            .features
            .iter()
            .map(|f| f.name.as_str())
            .chain(self.schema.targets.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self
                .schema
                .features
                .iter()
                .zip(self.inputs.row(i))
                .map(|(f, &v)| f.decode(v))
                .collect();
            rec.extend(self.outputs.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn first_non_finite(m: &Matrix) -> Option<(usize, usize)> {
    let i = m.as_slice().iter().position(|v| !v.is_finite())?;
    Some((i / m.cols(), i % m.cols()))
}

/// Reads a headed CSV file and validates it against `schema`.
///
/// Column order in the file is free; extra columns are ignored.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    read_dataset(&mut reader, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: &mut csv::Reader<R>, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let target_cols = schema
        .targets
        .iter()
        .map(|t| column(t))
        .collect::<Result<Vec<_>>>()?;

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            let v = f.encode(cell(c)).ok_or_else(|| Error::NonNumeric {
                row,
                column: f.name.clone(),
                value: cell(c).to_string(),
            })?;
            inputs.push(v);
        }
        for (t, &c) in schema.targets.iter().zip(&target_cols) {
            let v = cell(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row,
                    column: t.clone(),
                    value: cell(c).to_string(),
                })?;
            outputs.push(v);
        }
    }
    let n = inputs.len() / schema.input_dim();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(
        schema.clone(),
        Matrix::from_vec(n, schema.input_dim(), inputs)?,
        Matrix::from_vec(n, schema.output_dim(), outputs)?,
    )
}
