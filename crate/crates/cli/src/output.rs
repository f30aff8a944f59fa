//! Report tables and their CSV / JSON encodings.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Formats `v` to `precision` significant digits with trailing zeros removed.
///
/// Plain notation is used for decimal exponents in `[-5, precision)`,
/// scientific otherwise. Re-parsing the result and formatting it again gives
/// the same string.
pub fn format_number(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let precision = precision.max(1);
    let sci = format!("{:.*e}", precision - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if v < 0.0 { "-" } else { "" };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();

    if exp < -5 || exp >= precision as i32 {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        return if rest.is_empty() { format!("{sign}{lead}e{exp}") } else { format!("{sign}{lead}.{rest}e{exp}") };
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), format!("{}{digits}", "0".repeat((-exp - 1) as usize)))
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// `v` rounded to `precision` significant digits.
pub fn round_sig(v: f64, precision: usize) -> f64 {
    if v.is_finite() {
        format_number(v, precision).parse().expect("formatted number parses")
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// One emitted document: a kind tag, scalar metadata and a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: &'static str,
    pub meta: Vec<(String, Cell)>,
    pub table: Table,
}

impl Report {
    pub fn new(kind: &'static str, table: Table) -> Self {
        Self { kind, meta: Vec::new(), table }
    }

    pub fn with(mut self, key: &str, value: impl Into<Cell>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self, format: Format, precision: usize) -> CliResult<String> {
        match format {
            Format::Csv => self.render_csv(precision),
            Format::Json => Ok(self.render_json(precision)),
        }
    }

    fn render_csv(&self, precision: usize) -> CliResult<String> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Io(e.to_string());
        writer.write_record(&self.table.header).map_err(fail)?;
        for row in &self.table.rows {
            writer.write_record(row.iter().map(|c| cell_text(c, precision))).map_err(fail)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    fn render_json(&self, precision: usize) -> String {
        let mut root = Map::new();
        root.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
        root.insert("kind".into(), Value::String(self.kind.into()));
        for (key, cell) in &self.meta {
            root.insert(key.clone(), cell_json(cell, precision));
        }
        let rows = self
            .table
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.table.header.iter().zip(row).map(|(h, c)| (h.clone(), cell_json(c, precision))).collect();
                Value::Object(obj)
            })
            .collect();
        root.insert("rows".into(), Value::Array(rows));
        let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
        text.push('\n');
        text
    }
}

fn cell_text(cell: &Cell, precision: usize) -> String {
    match cell {
        Cell::Num(v) => format_number(*v, precision),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(cell: &Cell, precision: usize) -> Value {
    match cell {
        Cell::Num(v) => Number::from_f64(round_sig(*v, precision)).map_or(Value::Null, Value::Number),
        Cell::Int(v) => Value::Number((*v).into()),
        Cell::Bool(v) => Value::Bool(*v),
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Empty => Value::Null,
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_number(3.14159265, 6), "3.14159");
        assert_eq!(format_number(-0.000123456789, 6), "-0.000123457");
        assert_eq!(format_number(1.5e-9, 6), "1.5e-9");
        assert_eq!(format_number(12345678.0, 6), "1.23457e7");
        assert_eq!(format_number(123456.0, 6), "123456");
        assert_eq!(format_number(9.9999996, 6), "10");
        assert_eq!(format_number(0.5, 6), "0.5");
        assert_eq!(format_number(-0.0, 6), "0");
        assert_eq!(format_number(2.0, 1), "2");
        assert_eq!(format_number(f64::NAN, 6), "NaN");
    }

    #[test]
    fn formatting_is_idempotent() {
        let mut x = 0.7368421052631579f64;
        for _ in 0..2000 {
            x = (x * 3.7 * (1.0 - x)).abs();
            for scale in [1e-8, 1e-3, 1.0, 1e4, 1e9] {
                for p in [1, 3, 6, 12, 17] {
                    let once = format_number(x * scale, p);
                    let twice = format_number(once.parse().unwrap(), p);
                    assert_eq!(once, twice);
                }
            }
        }
    }

    #[test]
    fn csv_and_json_rendering() {
        let mut table = Table::new(&["a", "b", "c"]);
        table.push(vec![Cell::Num(1.0 / 3.0), Cell::Int(7), Cell::Text("x,y".into())]);
        let report = Report::new("demo", table).with("seed", 3u64);
        assert_eq!(report.render(Format::Csv, 4).unwrap(), "a,b,c\n0.3333,7,\"x,y\"\n");
        let json: Value = serde_json::from_str(&report.render(Format::Json, 4).unwrap()).unwrap();
        assert_eq!(json["schema_version"], "1");
        assert_eq!(json["seed"], 3);
        assert_eq!(json["rows"][0]["a"], 0.3333);
    }
}
