//! Run reports: a JSON document plus one CSV per table, all deterministic
//! for a given config and seed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    /// Cell by row key (first column) and column name.
    pub fn cell(&self, row: &str, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|n| n == column)?;
        self.rows.iter().find(|r| r[0] == row).map(|r| r[c].as_str())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Fixed-width text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.columns));
        if self.rows.len() > MAX_RENDERED_ROWS {
            out.push_str(&format!("({} rows, see {}.csv)\n", self.rows.len(), self.name));
            return out;
        }
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// Longer tables only appear in their CSV file.
const MAX_RENDERED_ROWS: usize = 40;

pub fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_else(|| "n/a".into())
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub case: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub title: String,
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tables: Vec<Table>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
}

impl Report {
    pub fn new<C: Serialize>(title: impl Into<String>, command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let bytes = serde_json::to_vec(&config)?;
        Ok(Self {
            title: title.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            seed,
            config,
            tables: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `report.json` and `<table>.csv` files into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            write_text(&dir.join(&name), &t.to_csv()?)?;
            self.outputs.push(name);
        }
        self.outputs.sort();
        self.outputs.dedup();
        let json = serde_json::to_string_pretty(self)?;
        write_text(&dir.join("report.json"), &(json + "\n"))
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n\n", self.title);
        for t in &self.tables {
            out.push_str(&t.render());
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        for f in &self.failures {
            out.push_str(&format!("FAILED {}: {}\n", f.case, f.error));
        }
        out
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `dir/rel`, with parents created.
pub fn prepare(dir: &Path, rel: &str) -> Result<PathBuf> {
    let p = dir.join(rel);
    if let Some(parent) = p.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(p)
}
