//! Result tables and their CSV/JSON export.
//!
//! Floats are written with Rust's shortest round-trip formatting (scientific
//! outside `[1e-4, 1e15)`), so equal values always produce equal bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    fn to_csv_field(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() && *v != 0.0 && !(1e-4..1e15).contains(&v.abs()) => format!("{v:e}"),
            Cell::Float(v) => format!("{v}"),
            Cell::Int(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(v) if v.is_finite() => json!(v),
            // JSON has no representation for infinities and NaN
            Cell::Float(_) => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    /// Unit symbol; `1` for dimensionless, empty for labels.
    pub unit: String,
}

/// Origin of a table: software version, experiment, seed and config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    /// Columns given as `(name, unit)` pairs.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header of {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric values of one column.
    pub fn column_values(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    fn header(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| {
                if c.unit.is_empty() {
                    c.name.clone()
                } else {
                    format!("{} [{}]", c.name, c.unit)
                }
            })
            .collect()
    }

    pub fn to_csv_string(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# version: {}", provenance.version);
        let _ = writeln!(out, "# experiment: {}", provenance.experiment);
        let _ = writeln!(out, "# table: {}", self.name);
        let _ = writeln!(out, "# seed: {}", provenance.seed);
        let _ = writeln!(out, "# config_hash: {}", provenance.config_hash);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv_field)).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        out.push_str(&String::from_utf8(bytes).expect("UTF-8 fields"));
        out
    }

    pub fn to_json_value(&self, provenance: &Provenance) -> Value {
        json!({
            "provenance": provenance,
            "table": self.name,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn to_json_string(&self, provenance: &Provenance) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value(provenance)).expect("JSON values serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// JSON schema that every exported JSON table satisfies.
pub const RESULT_TABLE_SCHEMA: &str = include_str!("../schema/result_table.schema.json");

/// Write `table` to `path`.
pub fn export(table: &ResultTable, provenance: &Provenance, path: &Path, format: Format) -> std::io::Result<()> {
    let text = match format {
        Format::Csv => table.to_csv_string(provenance),
        Format::Json => table.to_json_string(provenance),
    };
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provenance() -> Provenance {
        Provenance {
            version: "0.1.0".into(),
            experiment: "demo".into(),
            seed: 3,
            config_hash: "ab".repeat(32),
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("demo", &[("time", "s"), ("label", ""), ("gain", "1")]);
        t.push(vec![0.5.into(), "a,b".into(), f64::INFINITY.into()]);
        t.push(vec![2.5e-9.into(), "".into(), 0.0.into()]);
        let s = t.to_csv_string(&provenance());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[5], "time [s],label,gain [1]");
        assert_eq!(lines[6], "0.5,\"a,b\",inf");
        assert_eq!(lines[7], "2.5e-9,,0");
    }

    #[test]
    fn json_nulls_non_finite() {
        let mut t = ResultTable::new("demo", &[("x", "1")]);
        t.push(vec![f64::NAN.into()]);
        let v = t.to_json_value(&provenance());
        assert_eq!(v["rows"][0][0], Value::Null);
    }
}
