use std::io::{self, Write};
use std::str::FromStr;

use anyhow::bail;

/// Output encoding for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => bail!("unknown format '{other}' (csv or jsonl)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Row writer with a fixed column order. CSV gets a header row; JSONL gets
/// one object per row, with non-finite numbers as `null`.
pub struct TableWriter<W: Write> {
    out: W,
    format: Format,
    columns: Vec<&'static str>,
}

impl<W: Write> TableWriter<W> {
    pub fn new(mut out: W, format: Format, columns: &[&'static str]) -> io::Result<Self> {
        if format == Format::Csv {
            writeln!(out, "{}", columns.join(","))?;
        }
        Ok(Self {
            out,
            format,
            columns: columns.to_vec(),
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> io::Result<()> {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        match self.format {
            Format::Csv => {
                let fields: Vec<String> = cells
                    .iter()
                    .map(|c| match c {
                        Cell::Int(v) => v.to_string(),
                        Cell::Float(v) => fmt_float(*v),
                        Cell::Text(s) => s.clone(),
                    })
                    .collect();
                writeln!(self.out, "{}", fields.join(","))
            }
            Format::Jsonl => {
                let mut obj = serde_json::Map::new();
                for (name, c) in self.columns.iter().zip(cells) {
                    let v = match c {
                        Cell::Int(v) => serde_json::Value::from(*v),
                        Cell::Float(v) => serde_json::Number::from_f64(*v)
                            .map(serde_json::Value::Number)
                            .unwrap_or(serde_json::Value::Null),
                        Cell::Text(s) => serde_json::Value::from(s.as_str()),
                    };
                    obj.insert((*name).to_string(), v);
                }
                writeln!(self.out, "{}", serde_json::Value::Object(obj))
            }
        }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
