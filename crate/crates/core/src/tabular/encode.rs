use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};

/// Z-score parameters with population (divide-by-n) moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub stddev: f64,
    /// The fitting column had zero variance; `stddev` is recorded as 1.
    #[serde(default)]
    pub constant: bool,
}

impl Standardization {
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 {
            Standardization {
                mean,
                stddev: sd,
                constant: false,
            }
        } else {
            Standardization {
                mean,
                stddev: 1.0,
                constant: true,
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.stddev
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.stddev + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum FeatureRole {
    StandardizedNumeric { constant: bool },
    OneHotLevel { level: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    /// Index of the source column in the dataset.
    pub source: usize,
    pub name: String,
    #[serde(flatten)]
    pub role: FeatureRole,
}

/// Fitted encoding: everything needed to map datasets with this schema to
/// the numeric design space and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub columns: Vec<ColumnSpec>,
    pub target: usize,
    /// Per source column; `None` for categorical columns and the target.
    pub stats: Vec<Option<Standardization>>,
    pub feature_map: Vec<FeatureColumn>,
    pub target_standardization: Standardization,
}

impl Encoding {
    /// Encoded feature count `d`.
    pub fn dim(&self) -> usize {
        self.feature_map.len()
    }

    /// Range of encoded columns belonging to source column `source`.
    fn span(&self, source: usize) -> std::ops::Range<usize> {
        let start = self
            .feature_map
            .iter()
            .position(|f| f.source == source)
            .unwrap_or(0);
        let len = self
            .feature_map
            .iter()
            .filter(|f| f.source == source)
            .count();
        start..start + len
    }

    fn check_compatible(&self, ds: &Dataset) -> Result<()> {
        let same = self.columns.len() == ds.columns().len()
            && self.target == ds.target_index()
            && self
                .columns
                .iter()
                .zip(ds.columns())
                .all(|(a, b)| a.name == b.name && a.kind == b.kind);
        if same {
            Ok(())
        } else {
            Err(Error::Schema(
                "dataset columns do not match the fitted encoding".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub encoding: Encoding,
    /// n × d design matrix.
    pub values: Array2<f64>,
    /// Standardized target.
    pub target: Array1<f64>,
}

impl EncodedMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// An unseen category met while applying a fitted encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeWarning {
    pub row: usize,
    pub column: String,
    pub category: String,
}

#[derive(Debug, Clone)]
pub struct ApplyOutput {
    pub values: Array2<f64>,
    pub target: Array1<f64>,
    pub warnings: Vec<EncodeWarning>,
}

/// Fit standardization and one-hot layout on `ds` and encode it.
pub fn fit_encode(ds: &Dataset) -> EncodedMatrix {
    let mut stats = Vec::with_capacity(ds.columns().len());
    let mut feature_map = Vec::new();
    for (ci, spec) in ds.columns().iter().enumerate() {
        if ci == ds.target_index() {
            stats.push(None);
            continue;
        }
        match spec.kind {
            ColumnKind::Numeric | ColumnKind::Integer => {
                let col = column_f64(ds.column(ci));
                let s = Standardization::fit(&col);
                feature_map.push(FeatureColumn {
                    source: ci,
                    name: spec.name.clone(),
                    role: FeatureRole::StandardizedNumeric {
                        constant: s.constant,
                    },
                });
                stats.push(Some(s));
            }
            ColumnKind::Categorical => {
                for (level, cat) in spec.categories.iter().enumerate() {
                    feature_map.push(FeatureColumn {
                        source: ci,
                        name: format!("{}={}", spec.name, cat),
                        role: FeatureRole::OneHotLevel { level },
                    });
                }
                stats.push(None);
            }
        }
    }
    let target_standardization = Standardization::fit(&ds.target_values());
    let encoding = Encoding {
        columns: ds.columns().to_vec(),
        target: ds.target_index(),
        stats,
        feature_map,
        target_standardization,
    };
    let out = apply_encode(&encoding, ds).expect("encoding fitted on this dataset");
    debug_assert!(out.warnings.is_empty());
    EncodedMatrix {
        encoding,
        values: out.values,
        target: out.target,
    }
}

fn column_f64(col: &ColumnData) -> Vec<f64> {
    (0..col.len()).map(|r| col.get_f64(r)).collect()
}

/// Encode `ds` with stored statistics. Unseen categories produce an all-zero
/// one-hot group and a warning.
pub fn apply_encode(enc: &Encoding, ds: &Dataset) -> Result<ApplyOutput> {
    enc.check_compatible(ds)?;
    let n = ds.n();
    let mut values = Array2::<f64>::zeros((n, enc.dim()));
    let mut warnings = Vec::new();
    for (ci, spec) in enc.columns.iter().enumerate() {
        if ci == enc.target {
            continue;
        }
        let span = enc.span(ci);
        match (spec.kind, ds.column(ci)) {
            (ColumnKind::Categorical, ColumnData::Categorical(codes)) => {
                let ds_levels = &ds.columns()[ci].categories;
                // map the dataset's level indices onto the fitted layout
                let remap: Vec<Option<usize>> = ds_levels
                    .iter()
                    .map(|l| spec.categories.iter().position(|c| c == l))
                    .collect();
                for (r, &code) in codes.iter().enumerate() {
                    match remap[code as usize] {
                        Some(level) => values[[r, span.start + level]] = 1.0,
                        None => warnings.push(EncodeWarning {
                            row: r,
                            column: spec.name.clone(),
                            category: ds_levels[code as usize].clone(),
                        }),
                    }
                }
            }
            (_, col) => {
                let s = enc.stats[ci].expect("numeric column has statistics");
                for r in 0..n {
                    values[[r, span.start]] = s.apply(col.get_f64(r));
                }
            }
        }
    }
    let ts = enc.target_standardization;
    let target = ds.target_values().into_iter().map(|y| ts.apply(y)).collect();
    Ok(ApplyOutput {
        values,
        target,
        warnings,
    })
}

/// Map encoded rows back to the original schema.
///
/// Integer columns round half-to-even; one-hot groups decode by argmax with
/// ties going to the lowest level.
pub fn decode(enc: &Encoding, values: ArrayView2<f64>, target: ArrayView1<f64>) -> Result<Dataset> {
    if values.ncols() != enc.dim() {
        return Err(Error::Shape(format!(
            "expected {} encoded columns, got {}",
            enc.dim(),
            values.ncols()
        )));
    }
    if target.len() != values.nrows() {
        return Err(Error::Shape(format!(
            "{} target values for {} rows",
            target.len(),
            values.nrows()
        )));
    }
    for ((r, c), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "row {r}, encoded column `{}`",
                enc.feature_map[c].name
            )));
        }
    }
    if let Some(r) = target.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("row {r}, target")));
    }

    let m = values.nrows();
    let mut data = Vec::with_capacity(enc.columns.len());
    for (ci, spec) in enc.columns.iter().enumerate() {
        if ci == enc.target {
            let ts = enc.target_standardization;
            data.push(ColumnData::Numeric(target.iter().map(|&z| ts.invert(z)).collect()));
            continue;
        }
        let span = enc.span(ci);
        let col = match spec.kind {
            ColumnKind::Numeric => {
                let s = enc.stats[ci].expect("numeric column has statistics");
                ColumnData::Numeric((0..m).map(|r| s.invert(values[[r, span.start]])).collect())
            }
            ColumnKind::Integer => {
                let s = enc.stats[ci].expect("integer column has statistics");
                ColumnData::Integer(
                    (0..m)
                        .map(|r| s.invert(values[[r, span.start]]).round_ties_even() as i64)
                        .collect(),
                )
            }
            ColumnKind::Categorical => ColumnData::Categorical(
                (0..m)
                    .map(|r| {
                        let mut best = 0;
                        for k in 1..span.len() {
                            if values[[r, span.start + k]] > values[[r, span.start + best]] {
                                best = k;
                            }
                        }
                        best as u32
                    })
                    .collect(),
            ),
        };
        data.push(col);
    }
    Dataset::from_parts(enc.columns.clone(), data, enc.target)
}
