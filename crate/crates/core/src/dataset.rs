//! Mixed continuous/binary data tables with a JSON schema sidecar.
//!
//! Binary columns hold the values `1` and `2` stored as reals, so every
//! column can enter a linear predictor unchanged.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
        }
    }
}

/// Schema file layout: `{"columns": [{"name": "X1", "kind": "continuous"}, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub columns: Vec<ColumnSchema>,
}

impl SchemaFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: SchemaFile = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("schema {}: {e}", path.display())))?;
        validate_schema(&schema.columns)?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn validate_schema(columns: &[ColumnSchema]) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::Data("schema has no columns".into()));
    }
    let mut seen = HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::Data(format!("duplicate column name `{}`", c.name)));
        }
    }
    Ok(())
}

/// An `M x p` table of finite values with a per-column kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    schema: Vec<ColumnSchema>,
    // column-major storage: columns[i][m]
    columns: Vec<Vec<T>>,
    rows: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from column vectors, validating every invariant.
    pub fn from_columns(schema: Vec<ColumnSchema>, columns: Vec<Vec<T>>) -> Result<Self> {
        validate_schema(&schema)?;
        if columns.len() != schema.len() {
            return Err(Error::Data(format!(
                "{} columns for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let rows = columns[0].len();
        if rows == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        for (c, col) in schema.iter().zip(&columns) {
            if col.len() != rows {
                return Err(Error::Data(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    col.len()
                )));
            }
            for (m, &v) in col.iter().enumerate() {
                check_value(c, v).map_err(|message| Error::Cell {
                    row: m + 1,
                    column: c.name.clone(),
                    message,
                })?;
            }
        }
        Ok(Dataset {
            schema,
            columns,
            rows,
        })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn names(&self) -> Vec<String> {
        self.schema.iter().map(|c| c.name.clone()).collect()
    }

    pub fn kind(&self, i: usize) -> ColumnKind {
        self.schema[i].kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.schema.len()
    }

    pub fn column(&self, i: usize) -> Result<&[T]> {
        self.columns.get(i).map(Vec::as_slice).ok_or_else(|| {
            Error::Usage(format!(
                "column index {i} out of range for {} columns",
                self.schema.len()
            ))
        })
    }

    pub(crate) fn col(&self, i: usize) -> &[T] {
        &self.columns[i]
    }

    pub fn value(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    /// The first `n` rows (all rows if `n` exceeds the count).
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("prefix of zero rows".into()));
        }
        let n = n.min(self.rows);
        Ok(Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c[..n].to_vec()).collect(),
            rows: n,
        })
    }

    pub fn schema_file(&self) -> SchemaFile {
        SchemaFile {
            columns: self.schema.clone(),
        }
    }

    /// Reads a header + comma-separated numeric CSV and validates it against
    /// the schema at `schema_path`.
    pub fn load_csv(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Self> {
        let schema = SchemaFile::load(schema_path)?;
        Self::load_csv_with_schema(path, schema.columns)
    }

    pub fn load_csv_with_schema(path: impl AsRef<Path>, schema: Vec<ColumnSchema>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut records = reader.records();
        let header = match records.next() {
            None => return Err(Error::Data(format!("{}: empty file", path.display()))),
            Some(r) => r.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?,
        };
        let header: Vec<&str> = header.iter().collect();
        let expected: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
        if header != expected {
            return Err(Error::Data(format!(
                "{}: header {:?} does not match schema columns {:?}",
                path.display(),
                header,
                expected
            )));
        }
        let mut columns: Vec<Vec<T>> = vec![Vec::new(); schema.len()];
        for (idx, record) in records.enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::Data(format!("{}: row {row}: {e}", path.display())))?;
            if record.len() != schema.len() {
                return Err(Error::Data(format!(
                    "{}: row {row} has {} fields, expected {}",
                    path.display(),
                    record.len(),
                    schema.len()
                )));
            }
            for ((cell, c), col) in record.iter().zip(&schema).zip(columns.iter_mut()) {
                let v: T = cell.parse().map_err(|_| Error::Cell {
                    row,
                    column: c.name.clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                check_value(c, v).map_err(|message| Error::Cell {
                    row,
                    column: c.name.clone(),
                    message,
                })?;
                col.push(v);
            }
        }
        if columns[0].is_empty() {
            return Err(Error::Data(format!("{}: no data rows", path.display())));
        }
        Self::from_columns(schema, columns)
    }

    /// Writes the header and rows; values use the shortest representation
    /// that parses back to the same number.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{}", self.names().join(",")).map_err(io)?;
        let mut line = String::new();
        for m in 0..self.rows {
            line.clear();
            for (i, col) in self.columns.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&col[m].to_string());
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

fn check_value<T: Scalar>(c: &ColumnSchema, v: T) -> std::result::Result<(), String> {
    if !v.is_finite() {
        return Err(format!("non-finite value {v}"));
    }
    if c.kind == ColumnKind::Binary && v != T::one() && v != T::lit(2.0) {
        return Err(format!("binary value {v} not in {{1, 2}}"));
    }
    Ok(())
}

/// Free-function form of [`Dataset::load_csv`].
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    Dataset::load_csv(path, schema_path)
}

pub fn save_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    ds.save_csv(path)
}

pub fn column<T: Scalar>(ds: &Dataset<T>, i: usize) -> Result<&[T]> {
    ds.column(i)
}
