//! Report rows and byte-stable CSV/JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

/// Output format of tabular reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => csv_escape(s),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Int(i) => Value::from(*i),
            Cell::Num(x) => num(*x),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
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
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Columns plus rows, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> =
                        self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => render_json(&self.to_json()),
        }
    }
}

/// Result of one check: a residual (`pass` iff `|value| <= tolerance`) or a value compared with
/// an expected one (`pass` iff `|value - expected| <= tolerance`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub surface_id: String,
    pub grid: usize,
    /// Digest of the inputs that produced the row.
    pub digest: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn residual(id: &str, surface_id: &str, grid: usize, inputs: &str, value: f64, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            surface_id: surface_id.into(),
            grid,
            digest: digest(inputs),
            value,
            expected: None,
            tolerance,
            pass: value.abs() <= tolerance,
        }
    }

    pub fn value(id: &str, surface_id: &str, grid: usize, inputs: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            surface_id: surface_id.into(),
            grid,
            digest: digest(inputs),
            value,
            expected: Some(expected),
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        }
    }
}

/// Residual rows as the `identity_id,surface_id,grid,residual,pass` table.
pub fn residual_table(rows: &[ReportRow]) -> Table {
    let mut t = Table::new(&["identity_id", "surface_id", "grid", "residual", "pass"]);
    for r in rows {
        t.push(vec![r.id.clone().into(), r.surface_id.clone().into(), r.grid.into(), r.value.into(), r.pass.into()]);
    }
    t
}

/// Writes report rows as CSV (residual columns) or JSON (every field) to `path`, or stdout.
pub fn emit_report(rows: &[ReportRow], format: Format, path: Option<&Path>) -> io::Result<()> {
    let text = match format {
        Format::Csv => residual_table(rows).to_csv(),
        Format::Json => render_json(&serde_json::to_value(rows).map_err(io::Error::other)?),
    };
    write_output(&text, path)
}

pub fn write_output(text: &str, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io::Error::new(e.kind(), format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values built from finite data serialise");
    s.push('\n');
    s
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Shortest decimal that reads back to the same `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        serde_json::Number::from_f64(x).expect("finite").to_string()
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// FNV-1a hash of the inputs, in hex; stable across platforms and releases.
pub fn digest(inputs: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in inputs.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, -2.5e-12, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let t = residual_table(&[]);
        assert_eq!(t.to_csv(), "identity_id,surface_id,grid,residual,pass\n");
    }

    #[test]
    fn one_row() {
        let r = ReportRow::residual("ambient/comm", "xyt-graph", 64, "x", 2e-9, 1e-4);
        let csv = residual_table(std::slice::from_ref(&r)).to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "ambient/comm,xyt-graph,64,2e-9,true");
        assert!(!ReportRow::residual("a", "s", 8, "x", -1.0, 0.5).pass);
        assert!(ReportRow::value("a", "s", 8, "x", 8.0, 8.0 + 1e-9, 1e-8).pass);
        assert_eq!(r.digest, digest("x"));
        assert_ne!(digest("x"), digest("y"));
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["vertical-plane:1,0,0".into(), Cell::Empty]);
        assert_eq!(t.to_csv(), "a,b\n\"vertical-plane:1,0,0\",\n");
        assert_eq!(t.to_json()[0]["b"], Value::Null);
    }
}
