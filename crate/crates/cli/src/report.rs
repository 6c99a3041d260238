//! Versioned tabular reports written as CSV or JSON.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde_json::{Map, Value};

pub const SCHEMA: &str = "horizon_check_report_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

/// Nine significant digits, plain notation for moderate exponents.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let rounded: f64 = sci.parse().expect("round trip");
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
            Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // the JSON number carries exactly the digits written to CSV
            Cell::Num(v) if v.is_finite() => {
                Value::Number(serde_json::Number::from_f64(format_number(*v).parse().expect("finite")).expect("finite"))
            }
            Cell::Num(v) => Value::String(format_number(*v)),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { command: command.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Rows whose `key` column holds the text `value`.
    pub fn rows_where<'a>(&'a self, key: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let i = self.column(key).expect("known column");
        self.rows.iter().filter(move |r| matches!(&r[i], Cell::Text(s) if s == value))
    }

    /// Text of the named column, for text cells.
    pub fn text<'a>(&self, row: &'a [Cell], column: &str) -> Option<&'a str> {
        match &row[self.column(column)?] {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn number(&self, row: &[Cell], column: &str) -> Option<f64> {
        match row[self.column(column)?] {
            Cell::Num(v) => Some(v),
            Cell::Int(i) => Some(i as f64),
            _ => None,
        }
    }

    /// Schema line, command line, header row, then the rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{SCHEMA},{}", self.command).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(",")).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    m.insert((*name).to_string(), cell.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut top = Map::new();
        top.insert("schema".into(), Value::String(SCHEMA.into()));
        top.insert("command".into(), Value::String(self.command.clone()));
        top.insert("columns".into(), Value::from(self.columns.clone()));
        top.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn write_to(&self, format: Format, mut w: impl Write) -> io::Result<()> {
        w.write_all(self.render(format).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_number(2.4), "2.4");
        assert_eq!(format_number(32.0), "32");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_number(2.0 - std::f64::consts::FRAC_PI_2), "0.429203673");
        assert_eq!(format_number(-1.0e-7), "-1e-7");
        assert_eq!(format_number(1.234567891e12), "1.23456789e12");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(99999999.96), "100000000");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn csv_quotes_and_json_mirror() {
        let mut r = Report::new("demo", &["name", "value", "flag", "missing"]);
        r.push(vec!["a, \"b\"".into(), 1.0f64.into(), true.into(), Cell::Empty]);
        assert_eq!(r.to_csv(), "horizon_check_report_v1,demo\nname,value,flag,missing\n\"a, \"\"b\"\"\",1,true,\n");
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["rows"][0]["name"], "a, \"b\"");
        assert_eq!(v["rows"][0]["value"], 1.0);
        assert!(v["rows"][0]["missing"].is_null());
    }
}
