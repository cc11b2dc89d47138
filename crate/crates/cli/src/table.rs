//! Tabular output as CSV or JSON.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::spec::{Format, RunSpec};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(round_sig(*v)),
            Cell::Num(v) => json!(fmt_num(*v)),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

fn round_sig(v: f64) -> f64 {
    format!("{v:.11e}").parse().expect("formatted float parses")
}

/// 12 significant digits, shortest plain form; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", round_sig(v))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.columns).map_err(CliError::io)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::csv)).map_err(CliError::io)?;
        }
        out.flush().map_err(CliError::io)
    }

    pub fn to_json(&self, spec: &RunSpec) -> Value {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let m: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(m)
            })
            .collect();
        json!({
            "metadata": {
                "spec": spec,
                "version": env!("CARGO_PKG_VERSION"),
                "seed": spec.sim.seed,
            },
            "columns": self.columns,
            "records": records,
        })
    }

    /// Writes to `spec.output.path`, or to `stdout` when no path is set.
    pub fn emit(&self, spec: &RunSpec, stdout: &mut dyn Write) -> Result<(), CliError> {
        let mut file;
        let w: &mut dyn Write = match &spec.output.path {
            Some(p) => {
                file = std::fs::File::create(p)
                    .map_err(|e| CliError::invalid(format!("cannot write --out {}: {e}", p.display())))?;
                &mut file
            }
            None => stdout,
        };
        match spec.output.format {
            Format::Csv => self.write_csv(w),
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, &self.to_json(spec)).map_err(CliError::io)?;
                writeln!(w).map_err(CliError::io)
            }
        }
    }
}
