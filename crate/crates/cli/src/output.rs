//! Deterministic result emission: CSV with a fixed header or one JSON object
//! per row, to stdout or a file. No timestamps or locale-dependent
//! formatting goes into the artifact; wall-times are logged to stderr.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => anyhow::bail!("unknown format {other:?}; expected csv or json"),
        }
    }
}

/// One value in a row; formatted without locale dependence (`.` decimal
/// separator, shortest round-trip floats).
#[derive(Debug, Clone)]
pub enum Value {
    Int(i128),
    Float(f64),
    Str(String),
    Bool(bool),
    /// Empty CSV field / JSON null.
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => format!("{v}"),
            Value::Str(s) => s.clone(),
            Value::Bool(b) => (*b as u8).to_string(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => serde_json::json!(*v as i64),
            Value::Float(v) => serde_json::json!(v),
            Value::Str(s) => serde_json::json!(s),
            Value::Bool(b) => serde_json::json!(b),
            Value::Missing => serde_json::Value::Null,
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                let _ = writeln!(out, "{}", self.columns.join(","));
                for row in &self.rows {
                    let fields: Vec<String> = row.iter().map(Value::csv).collect();
                    let _ = writeln!(out, "{}", fields.join(","));
                }
            }
            Format::Json => {
                for row in &self.rows {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .columns
                        .iter()
                        .zip(row.iter())
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    let _ = writeln!(out, "{}", serde_json::Value::Object(obj));
                }
            }
        }
        out
    }
}

/// Writes rendered output to the path, or stdout when absent.
pub fn emit(table: &Table, format: Format, out: Option<&PathBuf>) -> Result<()> {
    let rendered = table.render(format);
    match out {
        Some(path) => fs::write(path, rendered)
            .with_context(|| format!("cannot write output file {}", path.display()))?,
        None => std::io::stdout().write_all(rendered.as_bytes())?,
    }
    Ok(())
}
