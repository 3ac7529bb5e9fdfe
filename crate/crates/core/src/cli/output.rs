//! CSV and JSON emission of sweep rows.
//!
//! CSV: one header line, then one line per row. Column order follows
//! [`SweepRow`] field order followed by `schema_version`; the leading columns
//! are `sweep_param,sweep_value,r_key_mc,r_key_se,r_key_oracle,r_key_z`.
//! Floats carry 17 significant digits, absent values are empty fields.
//!
//! JSON: `{"schema_version": .., "config": {..}, "rows": [..]}` with floats
//! in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cli::config::{ExperimentConfig, OutputFormat};
use crate::cli::sweep::SweepRow;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("nothing to write: no rows")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn row_fields(row: &SweepRow) -> serde_json::Map<String, Value> {
    match serde_json::to_value(row) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("SweepRow serializes to an object"),
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn csv_header() -> String {
    let mut cols: Vec<String> = row_fields(&SweepRow::default()).keys().cloned().collect();
    cols.push("schema_version".into());
    cols.join(",")
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for row in rows {
        let mut cells: Vec<String> = row_fields(row).values().map(csv_cell).collect();
        cells.push(SCHEMA_VERSION.to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(config: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows: rows.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn render(config: &ExperimentConfig, rows: &[SweepRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(rows),
        OutputFormat::Json => to_json(config, rows),
    }
}

/// Writes rows to `path`, or to standard output when `path` is `None`.
pub fn emit(
    config: &ExperimentConfig,
    rows: &[SweepRow],
    format: OutputFormat,
    path: Option<&Path>,
) -> Result<(), EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    let text = render(config, rows, format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| EmitError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| EmitError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}
