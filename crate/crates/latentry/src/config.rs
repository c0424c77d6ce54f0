use std::collections::BTreeSet;
use std::path::PathBuf;

use latentry_core::{ConditionId, SplitSpec, TrainConfig, DEFAULT_TIE_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::IngestConfig;

/// Invalid flags or configuration files (exit status 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// ONL, OC2.5 and OC3 only.
    Core,
    /// All six conditions.
    Extended,
}

impl Analysis {
    pub fn default_conditions(self) -> BTreeSet<ConditionId> {
        match self {
            Analysis::Core => ConditionId::CORE.into_iter().collect(),
            Analysis::Extended => ConditionId::ALL.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub ingest: IngestConfig,
    pub analysis: Analysis,
    pub conditions: BTreeSet<ConditionId>,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub tie_tol: f64,
    pub formats: BTreeSet<Format>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(inputs: Vec<PathBuf>, out: PathBuf, analysis: Analysis) -> Self {
        Self {
            inputs,
            ingest: IngestConfig::default(),
            analysis,
            conditions: analysis.default_conditions(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            tie_tol: DEFAULT_TIE_TOL,
            formats: [Format::Csv, Format::Json].into_iter().collect(),
            out,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if self.inputs.is_empty() {
            return bad("at least one --input is required".into());
        }
        if self.conditions.is_empty() {
            return bad("no conditions selected".into());
        }
        if self.analysis == Analysis::Core {
            if let Some(c) = self.conditions.iter().find(|c| !ConditionId::CORE.contains(c)) {
                return bad(format!("{c} is not part of the core analysis; use --analysis extended"));
            }
        }
        if self.train.epochs == 0 {
            return bad("--epochs must be positive".into());
        }
        if !(self.train.lr.is_finite() && self.train.lr > 0.0) {
            return bad(format!("--lr must be positive, got {}", self.train.lr));
        }
        if !(self.split.holdout_fraction > 0.0 && self.split.holdout_fraction < 1.0) {
            return bad(format!("--holdout-frac must lie in (0, 1), got {}", self.split.holdout_fraction));
        }
        if !(self.tie_tol.is_finite() && self.tie_tol >= 0.0) {
            return bad(format!("--tie-tol must be non-negative, got {}", self.tie_tol));
        }
        if self.formats.is_empty() {
            return bad("no output format selected".into());
        }
        Ok(())
    }

    /// SHA-256 over the settings and the input file contents.
    ///
    /// Paths (input and output) are left out, so the same data analysed
    /// from different locations hashes identically.
    pub fn hash(&self, command: &str, input_digests: &[String]) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            command: &'a str,
            inputs: &'a [String],
            ingest: &'a IngestConfig,
            analysis: Analysis,
            conditions: &'a BTreeSet<ConditionId>,
            train: &'a TrainConfig,
            split: &'a SplitSpec,
            tie_tol: f64,
            formats: &'a BTreeSet<Format>,
        }
        let view = View {
            command,
            inputs: input_digests,
            ingest: &self.ingest,
            analysis: self.analysis,
            conditions: &self.conditions,
            train: &self.train,
            split: &self.split,
            tie_tol: self.tie_tol,
            formats: &self.formats,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `ONL,OC2.5,OC3` style lists.
pub fn parse_conditions(list: &[String]) -> Result<BTreeSet<ConditionId>, ConfigError> {
    list.iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<ConditionId>().map_err(|e| ConfigError(e.to_string())))
        .collect()
}
