//! Report serialization: a JSON array with one object per line, or CSV with
//! a header row. Field order is the order rows are built in, and floats are
//! written with 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use wiener_radon::CheckReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
    Int(u64),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Null, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
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

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// One output record with ordered fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row(Vec<(&'static str, Cell)>);

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &'static str, value: impl Into<Cell>) -> Self {
        self.0.push((key, value.into()));
        self
    }

    pub fn keys(&self) -> Vec<&'static str> {
        self.0.iter().map(|(k, _)| *k).collect()
    }
}

impl From<&CheckReport> for Row {
    fn from(r: &CheckReport) -> Self {
        Row::new()
            .with("check", r.check.as_str())
            .with("closed_form", r.closed_form)
            .with("estimate", r.estimate)
            .with("std_error", r.std_error)
            .with("z", r.z)
            .with("pass", r.pass)
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_cell(cell: &Cell) -> String {
    match cell {
        Cell::Text(s) => serde_json::Value::String(s.clone()).to_string(),
        Cell::Float(x) if x.is_finite() => format_float(*x),
        Cell::Float(_) | Cell::Null => "null".into(),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
    }
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Text(s) => s.clone(),
        Cell::Float(x) if x.is_finite() => format_float(*x),
        Cell::Float(x) => x.to_string(),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Null => String::new(),
    }
}

pub fn to_json(rows: &[Row]) -> String {
    let mut out = String::from("[\n");
    for (i, row) in rows.iter().enumerate() {
        out.push('{');
        for (j, (key, cell)) in row.0.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "\"{key}\":{}", json_cell(cell));
        }
        out.push('}');
        if i + 1 < rows.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

pub fn to_csv(rows: &[Row]) -> io::Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        writer.write_record(first.keys())?;
    }
    for row in rows {
        debug_assert_eq!(row.keys(), rows[0].keys());
        writer.write_record(row.0.iter().map(|(_, c)| csv_cell(c)))?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes `rows` to `path`, or to standard output when `path` is `None`.
pub fn emit(rows: &[Row], format: Format, path: Option<&Path>) -> io::Result<()> {
    let text = match format {
        Format::Json => to_json(rows),
        Format::Csv => to_csv(rows)?,
    };
    match path {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
