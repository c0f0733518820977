//! Output tables, metadata stamping and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use liq_core::format::sig9;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identity of a run, stamped on every output.
#[derive(Debug, Clone)]
pub struct Meta {
    pub cmd: &'static str,
    /// Flags that affect the output, excluding paths.
    pub flags: Value,
    /// Extra `key=value` tokens for the CSV metadata line.
    pub labels: Vec<(String, String)>,
}

impl Meta {
    pub fn new(cmd: &'static str, flags: Value) -> Self {
        Self { cmd, flags, labels: Vec::new() }
    }

    pub fn label(mut self, key: &str, value: &str) -> Self {
        self.labels.push((key.to_string(), value.to_string()));
        self
    }

    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.flags).expect("flags serialize");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn comment_line(&self) -> String {
        let mut line = format!("# liq {VERSION} cmd={} config={}", self.cmd, self.config_hash());
        for (k, v) in &self.labels {
            line.push_str(&format!(" {k}={v}"));
        }
        line.push_str(&format!(" flags={}", self.flags));
        line
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!("liq"));
        m.insert("version".into(), json!(VERSION));
        m.insert("cmd".into(), json!(self.cmd));
        m.insert("config".into(), json!(self.config_hash()));
        for (k, v) in &self.labels {
            m.insert(k.clone(), json!(v));
        }
        m.insert("flags".into(), self.flags.clone());
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Computed value, printed with 9 significant digits.
    Num(f64),
    /// Timestamp or other input value, printed exactly.
    Exact(f64),
    Int(i64),
    Text(String),
    Flag(bool),
    Missing,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => sig9(*v),
            Cell::Exact(v) if v.is_finite() => format!("{v}"),
            Cell::Exact(v) => sig9(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => u8::from(*b).to_string(),
            Cell::Missing => "NaN".to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => round9(*v),
            Cell::Exact(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Flag(b) => json!(b),
            Cell::Missing => Value::Null,
        }
    }
}

/// A float cut to 9 significant digits, as a JSON number.
fn round9(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    json!(sig9(v).parse::<f64>().expect("sig9 output parses"))
}

/// Rounds every non-integral number in a JSON tree to 9 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round9(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Trailing `key=value` results (e.g. a correlation).
    pub summary: Vec<(&'static str, Cell)>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self::with_columns(columns.iter().map(|c| c.to_string()).collect())
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new(), summary: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self, meta: &Meta) -> String {
        let mut s = meta.comment_line();
        s.push('\n');
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        for (k, v) in &self.summary {
            s.push_str(&format!("# {k}={}\n", v.csv()));
        }
        s
    }

    fn json(&self, meta: &Meta) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.clone(), v.json()))
                        .collect(),
                )
            })
            .collect();
        let mut root = Map::new();
        root.insert("meta".into(), meta.to_json());
        root.insert("rows".into(), Value::Array(rows));
        if !self.summary.is_empty() {
            let summary = self.summary.iter().map(|(k, v)| (k.to_string(), v.json())).collect();
            root.insert("summary".into(), Value::Object(summary));
        }
        Value::Object(root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Output directory; every file is written to a temporary sibling and then
/// renamed into place.
pub struct Sink {
    dir: PathBuf,
    format: Format,
}

impl Sink {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), format })
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let fail = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(fail)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(fs::Permissions::from_mode(0o644))
                .map_err(fail)?;
        }
        tmp.write_all(bytes).map_err(fail)?;
        tmp.as_file().sync_all().map_err(fail)?;
        tmp.persist(&path).map_err(|e| fail(e.error))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }

    /// Writes `stem.csv` or `stem.json` depending on the chosen format.
    pub fn table(&self, stem: &str, table: &Table, meta: &Meta) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => self.write_bytes(&format!("{stem}.csv"), table.csv(meta).as_bytes()),
            Format::Json => self.json(&format!("{stem}.json"), table.json(meta)),
        }
    }

    /// Writes a JSON document with a `meta` field and floats cut to 9
    /// significant digits.
    pub fn report<T: Serialize>(&self, name: &str, body: &T, meta: &Meta) -> Result<PathBuf, CliError> {
        let body = serde_json::to_value(body).map_err(|e| CliError::Data(e.to_string()))?;
        self.json(name, with_meta(round_floats(body), meta))
    }

    /// Like [`Sink::report`] but keeps every float exactly.
    pub fn exact_report<T: Serialize>(&self, name: &str, body: &T, meta: &Meta) -> Result<PathBuf, CliError> {
        let body = serde_json::to_value(body).map_err(|e| CliError::Data(e.to_string()))?;
        self.json(name, with_meta(body, meta))
    }

    fn json(&self, name: &str, value: Value) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }
}

fn with_meta(body: Value, meta: &Meta) -> Value {
    let mut root = Map::new();
    root.insert("meta".into(), meta.to_json());
    match body {
        Value::Object(o) => root.extend(o),
        other => {
            root.insert("data".into(), other);
        }
    }
    Value::Object(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_render() {
        assert_eq!(Cell::Num(1.0 / 3.0).csv(), "0.333333333");
        assert_eq!(Cell::Exact(1357000000.5).csv(), "1357000000.5");
        assert_eq!(Cell::Missing.csv(), "NaN");
        assert_eq!(Cell::Flag(true).csv(), "1");
        assert_eq!(Cell::Num(1.0 / 3.0).json(), json!(0.333333333));
        assert_eq!(Cell::Num(f64::NAN).json(), Value::Null);
    }

    #[test]
    fn hash_depends_on_flags_only() {
        let a = Meta::new("drop", json!({"q": 40000.0}));
        let b = Meta::new("drop", json!({"q": 40000.0})).label("view", "daily");
        let c = Meta::new("drop", json!({"q": 1.0}));
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn floats_are_rounded_recursively() {
        let v = round_floats(json!({"a": [0.1234567891234, 3], "b": {"c": 2.0}}));
        assert_eq!(v, json!({"a": [0.123456789, 3], "b": {"c": 2.0}}));
    }
}
