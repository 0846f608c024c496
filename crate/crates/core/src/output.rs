//! CSV tables with `#` metadata lines, and the JSON run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Column-ordered table written as CSV. Metadata lines precede the header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    /// Parses a table written by [`Table::render`].
    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = Table::default();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once(':').unwrap_or((rest, ""));
                table.metadata.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                table.header = line.split(',').map(str::to_string).collect();
                break;
            }
        }
        if table.header.is_empty() {
            return Err(Error::data(path, "missing header"));
        }
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != table.header.len() {
                return Err(Error::data(path, format!("row {} has {} fields, expected {}", i + 1, row.len(), table.header.len())));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column; `path` is used for the error message only.
    pub fn numeric_column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let idx = self.column_index(name).ok_or_else(|| Error::data(path, format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx].parse::<f64>().map_err(|_| Error::data(path, format!("column '{name}': '{}' is not a number", r[idx])))
            })
            .collect()
    }
}

/// Fixed-width scientific formatting so outputs are byte-stable.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Time labels as given in the configuration (`1140`, `2.5`).
pub fn time_label(t: f64) -> String {
    format!("{t}")
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
    pub step: Option<usize>,
    pub trajectory: Option<usize>,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let (step, trajectory) = match e {
            Error::Numerical { step, trajectory, .. } => (Some(*step), *trajectory),
            _ => (None, None),
        };
        ErrorRecord {
            kind: e.kind().to_string(),
            message: e.to_string(),
            exit_code: e.exit_code(),
            step,
            trajectory,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantSummary {
    pub max_norm_drift: f64,
    pub max_gauge_residual: Option<f64>,
    pub energy_drift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub status: String,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub steps: usize,
    pub final_time: f64,
    pub invariants: InvariantSummary,
    pub files: Vec<String>,
    pub error: Option<ErrorRecord>,
}

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::data(&path, e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<serde_json::Value> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(&path, e.to_string()))
    }
}
