use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};

/// On-disk schema description:
/// `{"columns":[{"name":..,"kind":..,"categories":[..]?}],"target":".."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<SchemaColumn>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Fixed levels. When absent, levels are inferred in first-appearance order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = serde_json::from_reader(file)?;
        schema.check()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Schema with the dataset's levels fixed.
    pub fn of(ds: &Dataset) -> Self {
        Schema {
            columns: ds
                .columns()
                .iter()
                .map(|c| SchemaColumn {
                    name: c.name.clone(),
                    kind: c.kind,
                    categories: (c.kind == ColumnKind::Categorical).then(|| c.categories.clone()),
                })
                .collect(),
            target: ds.columns()[ds.target_index()].name.clone(),
        }
    }

    fn target_index(&self) -> Result<usize> {
        let idx = self
            .columns
            .iter()
            .position(|c| c.name == self.target)
            .ok_or_else(|| Error::Schema(format!("target `{}` is not a column", self.target)))?;
        if self.columns[idx].kind != ColumnKind::Numeric {
            return Err(Error::Schema(format!(
                "target `{}` must be numeric",
                self.target
            )));
        }
        Ok(idx)
    }

    fn check(&self) -> Result<()> {
        self.target_index()?;
        for c in &self.columns {
            if c.categories.is_some() && c.kind != ColumnKind::Categorical {
                return Err(Error::Schema(format!(
                    "non-categorical column `{}` declares categories",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

enum Builder {
    Numeric(Vec<f64>),
    Integer(Vec<i64>),
    Categorical {
        levels: Vec<String>,
        fixed: bool,
        codes: Vec<u32>,
    },
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    schema.check()?;
    let target = schema.target_index()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);

    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "header {header:?} does not match schema columns {expected:?}"
        )));
    }

    let mut builders: Vec<Builder> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => Builder::Numeric(Vec::new()),
            ColumnKind::Integer => Builder::Integer(Vec::new()),
            ColumnKind::Categorical => Builder::Categorical {
                fixed: c.categories.is_some(),
                levels: c.categories.clone().unwrap_or_default(),
                codes: Vec::new(),
            },
        })
        .collect();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != builders.len() {
            return Err(Error::Cell {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", builders.len(), record.len()),
            });
        }
        for ((field, b), col) in record.iter().zip(&mut builders).zip(&schema.columns) {
            let field = field.trim();
            let cell_err = |message: String| Error::Cell {
                row,
                column: col.name.clone(),
                message,
            };
            match b {
                Builder::Numeric(v) => {
                    let x: f64 = field
                        .parse()
                        .map_err(|_| cell_err(format!("cannot parse `{field}` as a number")))?;
                    if !x.is_finite() {
                        return Err(cell_err(format!("non-finite value `{field}`")));
                    }
                    v.push(x);
                }
                Builder::Integer(v) => {
                    let x: i64 = field
                        .parse()
                        .map_err(|_| cell_err(format!("cannot parse `{field}` as an integer")))?;
                    v.push(x);
                }
                Builder::Categorical {
                    levels,
                    fixed,
                    codes,
                } => {
                    let code = match levels.iter().position(|l| l == field) {
                        Some(c) => c,
                        None if *fixed => {
                            return Err(cell_err(format!("unknown category `{field}`")));
                        }
                        None => {
                            levels.push(field.to_string());
                            levels.len() - 1
                        }
                    };
                    codes.push(code as u32);
                }
            }
        }
    }

    let mut columns = Vec::with_capacity(builders.len());
    let mut data = Vec::with_capacity(builders.len());
    for (b, c) in builders.into_iter().zip(&schema.columns) {
        match b {
            Builder::Numeric(v) => {
                columns.push(ColumnSpec::numeric(&c.name));
                data.push(ColumnData::Numeric(v));
            }
            Builder::Integer(v) => {
                columns.push(ColumnSpec::integer(&c.name));
                data.push(ColumnData::Integer(v));
            }
            Builder::Categorical { levels, codes, .. } => {
                if levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` has no values to infer categories from",
                        c.name
                    )));
                }
                columns.push(ColumnSpec::categorical(&c.name, levels));
                data.push(ColumnData::Categorical(codes));
            }
        }
    }
    Dataset::new(columns, data, target)
}

/// Write `ds` as CSV with a header row, columns in dataset order.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))?;
    let mut record: Vec<String> = Vec::with_capacity(ds.columns().len());
    for row in 0..ds.n() {
        record.clear();
        for (ci, spec) in ds.columns().iter().enumerate() {
            record.push(match ds.column(ci) {
                ColumnData::Numeric(v) => format!("{}", v[row]),
                ColumnData::Integer(v) => v[row].to_string(),
                ColumnData::Categorical(v) => spec.categories[v[row] as usize].clone(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
