//! Result tables, CSV formatting and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    /// Numbers carry 17 significant digits so that CSVs are byte-stable.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
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

#[derive(Clone, Debug)]
pub struct Table {
    /// File stem; written as `<name>.csv`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// One PASS/FAIL comparison against a threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub op: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), value, op: "<=".into(), threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), value, op: ">=".into(), threshold, pass: value >= threshold }
    }

    /// A boolean property, recorded as `1 >= 1` or `0 >= 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `dir/name` and returns its manifest entry.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() })
}
