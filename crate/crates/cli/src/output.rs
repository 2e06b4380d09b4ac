//! Report rendering: pretty JSON, or CSV with 17 significant digits.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A report: the JSON document plus an optional primary table for CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn new<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            table: None,
        })
    }

    /// Uses an array of flat records as the CSV table.
    pub fn with_rows<T: Serialize>(mut self, rows: &[T]) -> Result<Self> {
        self.table = Some(Table::from_records(rows)?);
        Ok(self)
    }
}

impl Table {
    pub fn from_records<T: Serialize>(rows: &[T]) -> Result<Self> {
        let mut headers: Vec<String> = Vec::new();
        let mut flat_rows = Vec::with_capacity(rows.len());
        for r in rows {
            let mut flat = Vec::new();
            flatten("", &serde_json::to_value(r)?, &mut flat);
            for (k, _) in &flat {
                if !headers.contains(k) {
                    headers.push(k.clone());
                }
            }
            flat_rows.push(flat);
        }
        let rows = flat_rows
            .into_iter()
            .map(|flat| {
                headers
                    .iter()
                    .map(|h| flat.iter().find(|(k, _)| k == h).map_or(Value::Null, |(_, v)| v.clone()))
                    .collect()
            })
            .collect();
        Ok(Self { headers, rows })
    }
}

/// Dotted paths to scalar leaves; arrays of numbers stay whole.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                flatten(&key(k), inner, out);
            }
        }
        Value::Array(items) if items.iter().any(|i| i.is_object()) => {
            for (i, inner) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), inner, out);
            }
        }
        _ => out.push((prefix.to_string(), v.clone())),
    }
}

pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => format_number(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => v.to_string(),
    }
}

pub fn render(report: &Report, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&report.json)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let table = match &report.table {
                Some(t) => t.clone(),
                None => {
                    let mut flat = Vec::new();
                    flatten("", &report.json, &mut flat);
                    Table {
                        headers: vec!["field".into(), "value".into()],
                        rows: flat.into_iter().map(|(k, v)| vec![Value::String(k), v]).collect(),
                    }
                }
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.headers)?;
            for r in &table.rows {
                w.write_record(r.iter().map(cell))?;
            }
            w.into_inner().context("flushing CSV")
        }
    }
}

pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> Result<()> {
    let bytes = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_uses_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        let x = 0.15525527123456789_f64;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        let r = Report::new(&json!({"a": 1.5, "b": {"c": 2}})).unwrap();
        let s = String::from_utf8(render(&r, Format::Csv).unwrap()).unwrap();
        assert_eq!(s, "field,value\na,1.5000000000000000e0\nb.c,2\n");
    }

    #[test]
    fn tables_flatten_records() {
        let rows = vec![json!({"r": 1.0, "x": {"y": true}}), json!({"r": 2.0, "x": {"y": false}})];
        let t = Table::from_records(&rows).unwrap();
        assert_eq!(t.headers, vec!["r", "x.y"]);
        assert_eq!(t.rows[1][1], json!(false));
    }
}
