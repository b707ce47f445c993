//! CSV tables and JSON summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

/// `git describe` of the build, or `unknown` outside a checkout.
pub const BUILD: &str = env!("CURVMIX_BUILD");

/// A table of already formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn from_csv(text: &str) -> anyhow::Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }
}

/// Formats a cell: shortest round-trip representation, so equal values
/// always print identically.
pub fn cell<T: std::fmt::Display>(v: T) -> String {
    v.to_string()
}

/// Run metadata plus fitted exponents and acceptance-style assertions.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub build: String,
    pub config: Value,
    pub results: BTreeMap<String, Value>,
    pub assertions: BTreeMap<String, bool>,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            build: BUILD.to_string(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            results: BTreeMap::new(),
            assertions: BTreeMap::new(),
        }
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: T) {
        self.results.insert(key.to_string(), serde_json::to_value(value).expect("result serializes"));
    }

    pub fn assert(&mut self, key: &str, ok: bool) {
        self.assertions.insert(key.to_string(), ok);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub table: Table,
    pub summary: Summary,
}

impl Report {
    /// Writes `<name>.csv` and `<name>.summary.json` under `dir`.
    pub fn write(&self, dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let name = &self.summary.experiment;
        let csv_path = dir.join(format!("{name}.csv"));
        let json_path = dir.join(format!("{name}.summary.json"));
        fs::write(&csv_path, self.table.to_csv())?;
        fs::write(&json_path, self.summary.to_json())?;
        Ok((csv_path, json_path))
    }
}
