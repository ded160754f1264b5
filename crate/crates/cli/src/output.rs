//! One report shape rendered three ways: JSON tree, CSV rows, plain table.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::Value;
use srlp_core::report::{format_float, render_json, render_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub json: Value,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Summary lines printed above the table.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(json: Value, headers: &[&str]) -> Report {
        Report {
            json,
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => render_json(&self.json),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.headers)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                String::from_utf8(w.into_inner()?)?
            }
            Format::Table => {
                let mut out = String::new();
                for line in &self.notes {
                    out.push_str(line);
                    out.push('\n');
                }
                if !self.headers.is_empty() {
                    if !self.notes.is_empty() {
                        out.push('\n');
                    }
                    let headers: Vec<&str> = self.headers.iter().map(String::as_str).collect();
                    out.push_str(&render_table(&headers, &self.rows));
                }
                out
            }
        })
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let text = self.render(format)?;
        match out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

pub fn num(x: f64) -> String {
    format_float(x)
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, format_float)
}
