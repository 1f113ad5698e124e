//! Mixed-type tabular data: schema, ingestion, encoding and fold splitting.
//!
//! A [`Dataset`] is stored column-wise. Categorical cells hold an index into
//! the column's ordered category list, so categories keep their first-seen
//! (or schema-declared) order through every transformation.

mod csvio;
mod encode;
mod folds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csvio::{load_csv, read_csv, write_csv, Schema, SchemaColumn};
pub use encode::{
    apply_encode, decode, fit_encode, ApplyOutput, EncodeWarning, EncodedMatrix, Encoding,
    FeatureColumn, FeatureRole, Standardization,
};
pub use folds::{kfold, FoldPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered, duplicate-free levels; empty unless `kind` is categorical.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }

    pub fn integer(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Integer,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ColumnKind::Categorical => {
                if self.categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` has no categories",
                        self.name
                    )));
                }
                for (i, c) in self.categories.iter().enumerate() {
                    if self.categories[..i].contains(c) {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` lists `{}` twice",
                            self.name, c
                        )));
                    }
                }
            }
            _ if !self.categories.is_empty() => {
                return Err(Error::Schema(format!(
                    "non-categorical column `{}` declares categories",
                    self.name
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Integer(Vec<i64>),
    Categorical(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Integer(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Integer(_) => ColumnKind::Integer,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Integer(v) => ColumnData::Integer(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect())
            }
        }
    }

    fn extend_from(&mut self, other: &ColumnData) {
        match (self, other) {
            (ColumnData::Numeric(a), ColumnData::Numeric(b)) => a.extend_from_slice(b),
            (ColumnData::Integer(a), ColumnData::Integer(b)) => a.extend_from_slice(b),
            (ColumnData::Categorical(a), ColumnData::Categorical(b)) => a.extend_from_slice(b),
            _ => unreachable!("column kinds checked by caller"),
        }
    }

    /// Value as a real number; categorical cells yield their level index.
    pub fn get_f64(&self, row: usize) -> f64 {
        match self {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Integer(v) => v[row] as f64,
            ColumnData::Categorical(v) => v[row] as f64,
        }
    }
}

/// A single cell, used for row-wise access and CSV output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Numeric(f64),
    Integer(i64),
    Category(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<ColumnSpec>,
    data: Vec<ColumnData>,
    target: usize,
}

impl Dataset {
    /// Build a dataset, checking every invariant. Requires at least two rows.
    pub fn new(columns: Vec<ColumnSpec>, data: Vec<ColumnData>, target: usize) -> Result<Self> {
        let ds = Self::from_parts(columns, data, target)?;
        if ds.n() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a dataset needs at least 2 rows, got {}",
                ds.n()
            )));
        }
        Ok(ds)
    }

    /// Like [`Dataset::new`] but accepts any row count, for subsets and
    /// generated batches.
    pub(crate) fn from_parts(
        columns: Vec<ColumnSpec>,
        data: Vec<ColumnData>,
        target: usize,
    ) -> Result<Self> {
        if columns.len() != data.len() {
            return Err(Error::Shape(format!(
                "{} column specs for {} data columns",
                columns.len(),
                data.len()
            )));
        }
        if target >= columns.len() {
            return Err(Error::Schema(format!("target index {target} out of range")));
        }
        if columns[target].kind != ColumnKind::Numeric {
            return Err(Error::Schema(format!(
                "target column `{}` must be numeric",
                columns[target].name
            )));
        }
        for (i, c) in columns.iter().enumerate() {
            c.validate()?;
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        let n = data.first().map_or(0, ColumnData::len);
        for (spec, col) in columns.iter().zip(&data) {
            if col.kind() != spec.kind {
                return Err(Error::Schema(format!(
                    "column `{}` declared {:?} but holds {:?} data",
                    spec.name,
                    spec.kind,
                    col.kind()
                )));
            }
            if col.len() != n {
                return Err(Error::Shape(format!(
                    "column `{}` has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            match col {
                ColumnData::Categorical(v) => {
                    let levels = spec.categories.len() as u32;
                    if let Some(pos) = v.iter().position(|&c| c >= levels) {
                        return Err(Error::Cell {
                            row: pos + 1,
                            column: spec.name.clone(),
                            message: format!("category index {} out of range", v[pos]),
                        });
                    }
                }
                ColumnData::Numeric(v) => {
                    if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::Cell {
                            row: pos + 1,
                            column: spec.name.clone(),
                            message: "non-finite value".into(),
                        });
                    }
                }
                ColumnData::Integer(_) => {}
            }
        }
        Ok(Dataset {
            columns,
            data,
            target,
        })
    }

    pub fn n(&self) -> usize {
        self.data.first().map_or(0, ColumnData::len)
    }

    /// Feature count (every column except the target).
    pub fn p(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &ColumnData {
        &self.data[i]
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_values(&self) -> Vec<f64> {
        match &self.data[self.target] {
            ColumnData::Numeric(v) => v.clone(),
            _ => unreachable!("target is numeric by construction"),
        }
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        match &self.data[col] {
            ColumnData::Numeric(v) => Value::Numeric(v[row]),
            ColumnData::Integer(v) => Value::Integer(v[row]),
            ColumnData::Categorical(v) => Value::Category(v[row]),
        }
    }

    /// Rows `rows` in the given order (repeats allowed).
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            data: self.data.iter().map(|c| c.select(rows)).collect(),
            target: self.target,
        }
    }

    /// True when both datasets share column names, kinds, levels and target.
    pub fn same_schema(&self, other: &Dataset) -> bool {
        self.columns == other.columns && self.target == other.target
    }

    /// `self` followed by the rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.same_schema(other) {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let mut data = self.data.clone();
        for (a, b) in data.iter_mut().zip(&other.data) {
            a.extend_from(b);
        }
        Ok(Dataset {
            columns: self.columns.clone(),
            data,
            target: self.target,
        })
    }
}
