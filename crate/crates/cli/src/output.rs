//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Num(v) => write!(f, "{v:.15e}"),
            Self::Int(v) => write!(f, "{v}"),
            Self::Bool(v) => write!(f, "{v}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Num(v) => Some(*v),
            Self::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Single-row table from `(column, value)` pairs.
    pub fn record(pairs: Vec<(&str, Cell)>) -> Self {
        let (header, row): (Vec<_>, Vec<_>) = pairs.into_iter().map(|(k, v)| (k.to_string(), v)).unzip();
        Self { header, rows: vec![row] }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// First-row value of a column.
    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.column(name).and_then(|c| self.rows.first().map(|r| &r[c]))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| c.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Concatenates tables with identical headers, prefixing `key = value` columns.
    pub fn merge(key: &str, parts: &[(String, Table)]) -> Result<Table> {
        let Some((_, first)) = parts.first() else {
            bail!("nothing to merge");
        };
        let mut header = vec![key.to_string()];
        header.extend(first.header.iter().cloned());
        let mut rows = Vec::new();
        for (value, table) in parts {
            if table.header != first.header {
                bail!("cannot merge tables with different columns");
            }
            for row in &table.rows {
                let mut r = vec![Cell::Text(value.clone())];
                r.extend(row.iter().cloned());
                rows.push(r);
            }
        }
        Ok(Table { header, rows })
    }
}

/// Echo of a run: configuration, constants used and code version. No
/// timestamps or host data, so repeated runs produce identical files.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub scenario: toml::Value,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))
    }
}
