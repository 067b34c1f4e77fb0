//! Result tables and their CSV / JSON serialization.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};

pub const SCHEMA: &str = "sqg.result/1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }

    fn order(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Float(a), Cell::Float(b)) => a.total_cmp(b),
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Bool(a), Cell::Bool(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Float(_) => 0,
            Cell::Int(_) => 1,
            Cell::Bool(_) => 2,
            Cell::Text(_) => 3,
            Cell::Empty => 4,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map(Into::into).unwrap_or(Cell::Empty)
    }
}

/// 17 significant digits, which round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub type Row = Vec<Cell>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    /// Leading columns forming the sort key.
    pub key_len: usize,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>, key_len: usize) -> Self {
        Self { columns, key_len, rows: Vec::new() }
    }

    pub fn sort(&mut self) {
        let k = self.key_len;
        self.rows.sort_by(|a, b| {
            a[..k].iter().zip(&b[..k]).map(|(x, y)| x.order(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn json_rows(&self) -> Value {
        Value::Array(self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config_echo: Value,
    pub started: String,
    pub finished: String,
    pub exit_code: i32,
    pub diagnostics: Vec<String>,
    pub columns: Vec<&'static str>,
    /// Present in the JSON format; CSV output keeps rows in the data file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows_file: Option<String>,
}

/// Sidecar path for CSV output: `<output>.meta.json`.
pub fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub struct RunRecord<'a> {
    pub config: &'a RunConfig,
    pub table: &'a Table,
    pub diagnostics: &'a [String],
    pub started: String,
    pub finished: String,
    pub exit_code: i32,
}

/// Writes the result; stdout when no output path is configured.
pub fn emit(rec: &RunRecord) -> std::io::Result<()> {
    let cfg = rec.config;
    let mut env = Envelope {
        schema: SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.as_str(),
        config_echo: cfg.echo(),
        started: rec.started.clone(),
        finished: rec.finished.clone(),
        exit_code: rec.exit_code,
        diagnostics: rec.diagnostics.to_vec(),
        columns: rec.table.columns.clone(),
        rows: None,
        rows_file: None,
    };
    match cfg.format {
        Format::Csv => {
            let csv = rec.table.to_csv();
            match &cfg.output {
                Some(path) => {
                    std::fs::write(path, csv)?;
                    env.rows_file = path.file_name().map(|n| n.to_string_lossy().into_owned());
                    write_json(&meta_path(path), &env)
                }
                None => std::io::stdout().write_all(csv.as_bytes()),
            }
        }
        Format::Json => {
            env.rows = Some(rec.table.json_rows());
            match &cfg.output {
                Some(path) => write_json(path, &env),
                None => {
                    let mut text = serde_json::to_string_pretty(&env).map_err(std::io::Error::other)?;
                    text.push('\n');
                    std::io::stdout().write_all(text.as_bytes())
                }
            }
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
