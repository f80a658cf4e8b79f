//! Deterministic rendering, manifest hashing and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One CSV/JSON cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
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

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
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

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        // signed exponent, the form serde_json keeps when parsing
        let s = format!("{v:.16e}");
        match s.split_once('e') {
            Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
            _ => s,
        }
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Num(v) => fmt_num(*v),
            Self::Int(v) => v.to_string(),
            Self::Bool(v) => v.to_string(),
            Self::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Self::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Num(v) => num(*v),
            Self::Int(v) => Value::from(*v),
            Self::Bool(v) => Value::from(*v),
            Self::Text(s) => Value::from(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("columns".into(), Value::from(self.columns.clone()));
        m.insert(
            "rows".into(),
            Value::Array(self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect()),
        );
        Value::Object(m)
    }
}

/// Finite numbers become fixed-precision JSON numbers; non-finite ones
/// become the strings "inf", "-inf" or "nan".
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(fmt_num(v).parse().expect("formatted float is valid JSON"))
    } else {
        Value::from(fmt_num(v))
    }
}

/// Serializes `value` and rewrites every float at 17 significant digits.
pub fn to_value<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    fix_floats(&mut v);
    v
}

fn fix_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(f) = n.as_f64() {
                *v = num(f);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(fix_floats),
        Value::Object(m) => m.values_mut().for_each(fix_floats),
        _ => {}
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summary: Option<Value>,
    pub table: Option<Table>,
    /// Written next to `--out` as `<out>.stats.json`.
    pub sidecar: Option<Value>,
    /// False when a pass/fail verdict failed (exit code 2).
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn render(report: &Report, format: Format, manifest_hash: &str) -> String {
    match format {
        Format::Json => {
            let mut m = Map::new();
            m.insert("manifest_sha256".into(), Value::from(manifest_hash));
            if let Some(Value::Object(s)) = &report.summary {
                m.extend(s.clone());
            } else if let Some(s) = &report.summary {
                m.insert("summary".into(), s.clone());
            }
            if let Some(t) = &report.table {
                m.insert("table".into(), t.to_json());
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("json renders");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# manifest_sha256={manifest_hash}\n");
            let table = match (&report.table, &report.summary) {
                (Some(t), _) => t.clone(),
                (None, Some(v)) => {
                    let mut pairs = Vec::new();
                    flatten("", v, &mut pairs);
                    let mut t = Table::new(&["key", "value"]);
                    for (k, x) in pairs {
                        t.push(vec![Cell::Text(k), Cell::Text(x)]);
                    }
                    t
                }
                (None, None) => Table::default(),
            };
            s.push_str(&table.columns.join(","));
            s.push('\n');
            for r in &table.rows {
                let line: Vec<String> = r.iter().map(Cell::csv).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            s
        }
    }
}

/// Everything that determines the output bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub arguments: Value,
    /// Resolved parameters in file units (Hz).
    pub parameters: Option<Value>,
    pub seed: u64,
    pub format: Format,
}

impl RunManifest {
    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&to_value(self)).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Manifest plus the volatile fields that do not enter the hash.
    pub fn record(&self, outputs: &[PathBuf]) -> Value {
        let mut v = to_value(self);
        if let Value::Object(m) = &mut v {
            m.insert("manifest_sha256".into(), Value::from(self.hash()));
            m.insert(
                "outputs".into(),
                Value::from(outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
            );
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            m.insert("created_unix_s".into(), Value::from(now));
        }
        v
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}
