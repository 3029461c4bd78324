use std::io::Write;

use clap::ValueEnum;
use regbl::{Error, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Bumped whenever a report field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

/// Plot-ready rows behind a report.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: ToString>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(ToString::to_string).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|s| s.to_string()).collect());
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub config: Map<String, Value>,
    pub problem: Value,
    pub result: Value,
    pub table: Table,
    /// Summary lines placed above the CSV header.
    pub notes: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "library": "regbl",
            "version": regbl::VERSION,
            "command": self.command,
            "config": self.config,
            "problem": self.problem,
            "result": self.result,
        })
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json()).map_err(|e| Error::Problem(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => self.render_csv(),
        }
    }

    fn render_csv(&self) -> Result<Vec<u8>> {
        let io = |e: std::io::Error| Error::Problem(e.to_string());
        let mut out = Vec::new();
        writeln!(out, "# regbl {} schema {SCHEMA_VERSION}", regbl::VERSION).map_err(io)?;
        writeln!(out, "# command: {}", self.command).map_err(io)?;
        writeln!(out, "# config: {}", Value::Object(self.config.clone())).map_err(io)?;
        for note in &self.notes {
            writeln!(out, "# {note}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Problem(e.to_string());
        w.write_record(&self.table.header).map_err(csv_err)?;
        for row in &self.table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Problem(e.to_string()))
    }
}
