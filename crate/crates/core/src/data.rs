//! Integer-coded feature matrices shared by all learners.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary target. `Absent` (an outing) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Present,
    Absent,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Present => 0,
            Label::Absent => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Present
        } else {
            Label::Absent
        }
    }

    pub fn from_absent(absent: bool) -> Self {
        Self::from_index(usize::from(absent))
    }

    /// Majority of two class counts; ties go to `Present`.
    pub fn majority(counts: [usize; 2]) -> Self {
        if counts[1] > counts[0] {
            Label::Absent
        } else {
            Label::Present
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Two-valued, split by equality.
    Binary,
    /// Ordered integer code, split by thresholds.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub min: u16,
    pub max: u16,
}

impl FeatureSpec {
    pub fn binary(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            min: 0,
            max: 1,
        }
    }

    pub fn numeric(name: &str, min: u16, max: u16) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            min,
            max,
        }
    }

    pub fn cardinality(&self) -> usize {
        usize::from(self.max - self.min) + 1
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("row has {got} features, schema has {expected}")]
    Width { expected: usize, got: usize },
    #[error("feature `{feature}` value {value} outside [{min}, {max}]")]
    Encoding {
        feature: String,
        value: u16,
        min: u16,
        max: u16,
    },
}

pub fn validate_row(schema: &[FeatureSpec], row: &[u16]) -> Result<(), DataError> {
    if row.len() != schema.len() {
        return Err(DataError::Width {
            expected: schema.len(),
            got: row.len(),
        });
    }
    for (spec, &v) in schema.iter().zip(row) {
        if v < spec.min || v > spec.max {
            return Err(DataError::Encoding {
                feature: spec.name.clone(),
                value: v,
                min: spec.min,
                max: spec.max,
            });
        }
    }
    Ok(())
}

/// Row-major labeled examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    schema: Vec<FeatureSpec>,
    values: Vec<u16>,
    labels: Vec<Label>,
}

impl Examples {
    pub fn new(schema: Vec<FeatureSpec>) -> Self {
        Examples {
            schema,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[u16]>>(
        schema: Vec<FeatureSpec>,
        rows: &[R],
        labels: &[Label],
    ) -> Result<Self, DataError> {
        let mut ex = Examples::new(schema);
        for (r, &l) in rows.iter().zip(labels) {
            ex.push(r.as_ref(), l)?;
        }
        Ok(ex)
    }

    pub fn push(&mut self, row: &[u16], label: Label) -> Result<(), DataError> {
        validate_row(&self.schema, row)?;
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn schema(&self) -> &[FeatureSpec] {
        &self.schema
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u16] {
        let d = self.schema.len();
        &self.values[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> u16 {
        self.values[i * self.schema.len() + feature]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Copies the rows at `indices` (repeats allowed) into a new set.
    pub fn subset(&self, indices: &[usize]) -> Examples {
        let d = self.schema.len();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Examples {
            schema: self.schema.clone(),
            values,
            labels,
        }
    }
}
