//! Output tables (CSV or JSON lines) and the key-value scheme block.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rwrs_core::partition::PartitionScheme;
use serde_json::{Map, Number, Value as Json};

use crate::error::{usage, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" => Ok(Format::JsonLines),
            _ => Err(usage(format!("unknown format {s:?} (expected csv or jsonl)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v.into())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// Shortest decimal that reads back to the same `f64`; `inf`, `-inf`, `nan`
/// for non-finite values.
pub fn float_text(v: f64) -> String {
    match Number::from_f64(v) {
        Some(n) => n.to_string(),
        None if v.is_nan() => "nan".to_owned(),
        None if v > 0.0 => "inf".to_owned(),
        None => "-inf".to_owned(),
    }
}

impl Value {
    fn text(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(f) => float_text(*f),
            Value::Text(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Int(i) => Json::from(*i),
            Value::Float(f) => Number::from_f64(*f).map_or_else(|| Json::String(float_text(*f)), Json::Number),
            Value::Text(s) => Json::String(s.clone()),
            Value::Bool(b) => Json::Bool(*b),
        }
    }
}

/// Rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[&'static str] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// The cell of `row` under `column`.
    pub fn get(&self, row: usize, column: &str) -> Option<&Value> {
        let j = self.columns.iter().position(|c| *c == column)?;
        self.rows.get(row).map(|r| &r[j])
    }

    pub fn write(&self, out: &mut dyn Write, format: Format) -> Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Value::text))?;
                }
                w.flush()?;
            }
            Format::JsonLines => {
                for row in &self.rows {
                    let obj: Map<String, Json> = self.columns.iter().map(|c| c.to_string()).zip(row.iter().map(Value::json)).collect();
                    serde_json::to_writer(&mut *out, &obj).map_err(std::io::Error::from)?;
                    out.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }
}

fn list(values: &[f64]) -> String {
    values.iter().map(|&v| float_text(v)).collect::<Vec<_>>().join(",")
}

/// Every field of the scheme as `key = value` lines, floats at full precision.
pub fn scheme_key_values(s: &PartitionScheme) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("alpha", float_text(s.alpha));
    line("d", s.dim.to_string());
    line("n", s.n.to_string());
    line("y", float_text(s.y));
    line("a", float_text(s.a()));
    line("b", float_text(s.b_exponent()));
    line("delta0", float_text(s.delta0));
    line("eps0", float_text(s.eps0));
    line("chi", float_text(s.chi));
    line("beta", float_text(s.beta));
    line("levels", s.levels.to_string());
    line("b_list", list(&s.b));
    line("z_list", list(&s.z));
    line("y_list", list(&s.y_levels));
    line("y_down", float_text(s.y_down));
    line("y_up", float_text(s.y_up));
    line("z_threshold", float_text(s.z_threshold));
    line("gamma_list", list(&s.gamma));
    line("thresholds", list(&s.thresholds()));
    out
}
