//! Table and summary writers. Every file carries the tool version and config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
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

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
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

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Writes tables and summaries for one command under `dir`.
pub struct Writer {
    dir: PathBuf,
    format: Format,
    command: String,
    hash: String,
    config: Value,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, format: Format, command: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            command: command.to_string(),
            hash: config.hash(),
            config: serde_json::to_value(config).expect("config serializes"),
            written: Vec::new(),
        })
    }

    fn header(&self) -> Value {
        json!({
            "tool": "hjlab",
            "version": VERSION,
            "command": self.command,
            "config_sha256": self.hash,
            "config": self.config,
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.csv` with a commented provenance header, or `<stem>.json` in JSON mode.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let mut out = String::new();
                let _ = writeln!(out, "# hjlab {VERSION}");
                let _ = writeln!(out, "# command: {}", self.command);
                let _ = writeln!(out, "# config_sha256: {}", self.hash);
                let _ = writeln!(out, "# config: {}", self.config);
                let _ = writeln!(out, "{}", table.columns.join(","));
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                self.write(&format!("{stem}.csv"), &out)
            }
            Format::Json => {
                let mut doc = self.header();
                doc["table"] = serde_json::to_value(table).expect("table serializes");
                self.write(&format!("{stem}.json"), &pretty(&doc))
            }
        }
    }

    /// `<stem>.json` holding the provenance header and `result`.
    pub fn summary(&mut self, stem: &str, result: &impl Serialize) -> Result<(), CliError> {
        let mut doc = self.header();
        doc["result"] = serde_json::to_value(result).map_err(|e| CliError::Numeric(format!("unserializable result: {e}")))?;
        self.write(&format!("{stem}.json"), &pretty(&doc))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
