use std::fs;
use std::io::{self, Write};
use std::path::Path;

use expsumkit::expsum::ExpSum;
use expsumkit::numcore::Precision;
use rug::Float;
use serde_json::{json, Map, Value};

use crate::CliError;

/// First line of every CSV file.
pub const CSV_VERSION: &str = "# expsumkit-csv v1";

#[derive(Clone, Debug)]
pub enum Cell {
    /// Written with the table's significant-digit count.
    Num(Float),
    /// Written with one more digit so that it reads back to the same value.
    Exact(Float),
    Int(i64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Float> for Cell {
    fn from(v: Float) -> Self {
        Cell::Num(v)
    }
}

impl From<&Float> for Cell {
    fn from(v: &Float) -> Self {
        Cell::Num(v.clone())
    }
}

/// Scientific notation with `digits` significant digits.
pub fn sci(x: &Float, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.into();
    }
    format!("{:.*e}", digits.max(1), x)
}

/// A header row and its records, plus run metadata for JSON output.
#[derive(Clone, Debug)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    digits: usize,
    pub meta: Map<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str], ctx: Precision) -> Self {
        let mut meta = Map::new();
        meta.insert("bits".into(), json!(ctx.bits()));
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            digits: ctx.digits(),
            meta,
        }
    }

    pub fn with_columns(columns: Vec<String>, ctx: Precision) -> Self {
        let mut table = Table::new(&[], ctx);
        table.columns = columns;
        table
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn set_meta(&mut self, key: &str, value: Value) {
        self.meta.insert(key.into(), value);
    }

    /// A number in the table's format, for metadata.
    pub fn num(&self, x: &Float) -> Value {
        Value::String(sci(x, self.digits))
    }

    fn text(&self, cell: &Cell) -> String {
        match cell {
            Cell::Num(x) => sci(x, self.digits),
            Cell::Exact(x) => sci(x, self.digits + 1),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_VERSION);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|c| self.text(c)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let data: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let value = match cell {
                        Cell::Int(v) => json!(v),
                        other => Value::String(self.text(other)),
                    };
                    obj.insert(name.clone(), value);
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "meta": self.meta, "data": data })
    }

    pub fn render(&self, format: crate::args::Format) -> String {
        match format {
            crate::args::Format::Csv => self.to_csv(),
            crate::args::Format::Json => {
                let mut text = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
                text.push('\n');
                text
            }
        }
    }
}

/// Writes `text` to `path`, or to standard output.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io("stdout".into(), e))
        }
    }
}

/// Reads the sum stored in a JSON parameter file written by `gauss-expsum`
/// or `best-expsum`, at the precision recorded in its metadata.
pub fn read_expsum_json(text: &str) -> Result<ExpSum, CliError> {
    let bad = |what: &str| CliError::Usage(format!("parameter file: {what}"));
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let bits = doc["meta"]["bits"].as_u64().ok_or_else(|| bad("missing meta.bits"))? as u32;
    let ctx = Precision::new(bits).map_err(CliError::from)?;
    let rows = doc["data"].as_array().ok_or_else(|| bad("missing data"))?;
    let mut t = Vec::with_capacity(rows.len());
    let mut c = Vec::with_capacity(rows.len());
    for row in rows {
        for (key, dest) in [("t", &mut t), ("c", &mut c)] {
            let text = row[key].as_str().ok_or_else(|| bad(&format!("missing {key}")))?;
            dest.push(ctx.parse(text).map_err(CliError::from)?);
        }
    }
    ExpSum::new(t, c).map_err(CliError::from)
}
