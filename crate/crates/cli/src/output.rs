//! CSV and JSON emission with replay-stable formatting.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), `.` decimal
//! separator and `\n` line endings, so the same configuration and seed
//! produce byte-identical files on every platform. JSON summaries carry the
//! fully resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};

/// A cell of a CSV table.
#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, round-trippable.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_cell(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        Cell::Num(v) => fmt_num(*v),
        Cell::Int(v) => v.to_string(),
    }
}

/// A CSV table: one header row, fixed column order.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(fmt_cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// JSON summary wrapper: resolved config echo plus command-specific results.
#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    config: &'a ExperimentConfig,
    results: &'a T,
}

/// Write the outputs of one command into the output directory; returns the
/// list of files written.
pub fn emit<T: Serialize>(
    command: &str,
    config: &ExperimentConfig,
    table: Option<&Table>,
    results: &T,
) -> std::io::Result<Vec<PathBuf>> {
    let dir: &Path = &config.out;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if config.format.wants_csv() {
        if let Some(table) = table {
            let path = dir.join(format!("{command}.csv"));
            fs::write(&path, table.to_csv())?;
            written.push(path);
        }
    }
    if config.format.wants_json() {
        let path = dir.join(format!("{command}.json"));
        let summary = Summary { command, config, results };
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// `csv|json|both` override plumbed from the command line.
pub fn apply_format_override(config: &mut ExperimentConfig, format: Option<OutputFormat>) {
    if let Some(f) = format {
        config.format = f;
    }
}
