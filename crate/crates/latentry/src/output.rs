//! Report files. Every file starts with the same provenance record: a
//! `provenance` object in JSON, `#` comment lines in CSV.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use latentry_core::SplitRule;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingProvenance {
    pub split_seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub split_rule: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig, config_hash: String) -> Self {
        let rule = match cfg.split.rule {
            SplitRule::Random => "random",
            SplitRule::LastK => "last_k",
        };
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seed: cfg.train.seed,
            training: Some(TrainingProvenance {
                split_seed: cfg.split.seed,
                epochs: cfg.train.epochs,
                lr: cfg.train.lr,
                split_rule: format!("{rule} ceil({} * n_pairs)", cfg.split.holdout_fraction),
            }),
        }
    }

    /// Provenance of a synthetic dataset: the spec hash and generator seed.
    pub fn for_synth(config_hash: String, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: "synth".into(),
            config_hash,
            seed,
            training: None,
        }
    }

    fn csv_header(&self) -> String {
        let mut s = format!("# {} {} {}\n# config_hash={}\n# seed={}", self.tool, self.version, self.command, self.config_hash, self.seed);
        if let Some(t) = &self.training {
            s += &format!(" split_seed={} epochs={} lr={} split={}", t.split_seed, t.epochs, t.lr, t.split_rule);
        }
        s.push('\n');
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Collects the files a command writes, in order.
pub struct Writer<'a> {
    dir: PathBuf,
    provenance: &'a Provenance,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &Path, provenance: &'a Provenance) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), provenance, written: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: String) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> anyhow::Result<()> {
        let doc = Document { provenance: self.provenance, body };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.put(name, text)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let mut text = self.provenance.csv_header();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        text.push_str(std::str::from_utf8(&w.into_inner()?)?);
        self.put(name, text)
    }
}

/// A CSV table with already formatted cells.
#[derive(Debug, Default)]
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
}

/// Fixed two-decimal format used by the summary tables.
pub fn f2(x: f64) -> String {
    format!("{x:.2}")
}

pub fn opt2(x: Option<f64>) -> String {
    x.map(f2).unwrap_or_default()
}

/// Six decimals for coordinates meant for plotting.
pub fn f6(x: f64) -> String {
    format!("{x:.6}")
}
