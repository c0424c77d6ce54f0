//! CSV loading into a [`Dataset`].
//!
//! One row per observation. The condition and session columns are parsed
//! into labels; every other column that is not excluded must be numeric
//! and finite in every kept row, otherwise it is dropped with a warning.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use latentry_core::{ConditionId, Dataset, Observation, SessionId};
use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub condition_col: String,
    pub session_col: String,
    pub exclude_cols: Vec<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            condition_col: "condition".into(),
            session_col: "session".into(),
            exclude_cols: vec!["side".into(), "flag".into(), "overflow".into()],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("no rows with a recognised condition and session")]
    EmptyDataset,
    #[error("record {record}: expected {expected} fields, found {found}")]
    RaggedRows { record: u64, expected: usize, found: usize },
    #[error("{path}: feature columns differ from the first input")]
    HeaderMismatch { path: PathBuf },
    #[error(transparent)]
    Core(#[from] latentry_core::Error),
}

/// A feature column removed during ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    /// First offending value, as found in the file.
    pub value: String,
    pub record: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub dropped: Vec<DroppedColumn>,
    /// Rows skipped because the condition or session label did not parse.
    pub skipped_rows: usize,
    /// SHA-256 of each input file, in load order.
    pub digests: Vec<String>,
}

fn parse_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_dataset<R: Read>(reader: R, cfg: &IngestConfig) -> Result<Loaded, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).comment(Some(b'#')).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| IngestError::MissingColumn(name.into()));
    let cond_idx = find(&cfg.condition_col)?;
    let sess_idx = find(&cfg.session_col)?;
    let candidates: Vec<usize> = (0..header.len())
        .filter(|&i| i != cond_idx && i != sess_idx && !cfg.exclude_cols.contains(&header[i]))
        .collect();

    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); candidates.len()];
    let mut failed: Vec<Option<DroppedColumn>> = vec![None; candidates.len()];
    let mut skipped_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let number = i as u64 + 1;
        if record.len() != header.len() {
            return Err(IngestError::RaggedRows { record: number, expected: header.len(), found: record.len() });
        }
        let (Ok(condition), Ok(session)) =
            (record[cond_idx].parse::<ConditionId>(), record[sess_idx].parse::<SessionId>())
        else {
            skipped_rows += 1;
            continue;
        };
        labels.push((condition, session));
        for (k, &col) in candidates.iter().enumerate() {
            match parse_value(&record[col]) {
                Some(v) => columns[k].push(v),
                None if failed[k].is_none() => {
                    failed[k] = Some(DroppedColumn { name: header[col].clone(), value: record[col].to_string(), record: number });
                }
                None => {}
            }
        }
    }
    if labels.is_empty() {
        return Err(IngestError::EmptyDataset);
    }

    let keep: Vec<usize> = (0..candidates.len()).filter(|&k| failed[k].is_none()).collect();
    let dropped: Vec<DroppedColumn> = failed.into_iter().flatten().collect();
    for d in &dropped {
        log::warn!("dropping column `{}`: non-numeric value {:?} in record {}", d.name, d.value, d.record);
    }
    let names = keep.iter().map(|&k| header[candidates[k]].clone()).collect();
    let observations = labels
        .into_iter()
        .enumerate()
        .map(|(row, (condition, session))| Observation {
            condition,
            session,
            features: keep.iter().map(|&k| columns[k][row]).collect(),
        })
        .collect();
    Ok(Loaded { dataset: Dataset::new(observations, names)?, dropped, skipped_rows, digests: Vec::new() })
}

pub fn load_dataset(path: &Path, cfg: &IngestConfig) -> Result<Loaded, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut loaded = read_dataset(bytes.as_slice(), cfg)?;
    loaded.digests.push(sha256_hex(&bytes));
    Ok(loaded)
}

/// Loads several files in order and concatenates their rows.
///
/// Every file must yield the same feature columns as the first one.
pub fn load_many(paths: &[PathBuf], cfg: &IngestConfig) -> Result<Loaded, IngestError> {
    let mut iter = paths.iter();
    let first = iter.next().ok_or(IngestError::EmptyDataset)?;
    let Loaded { dataset, mut dropped, mut skipped_rows, mut digests } = load_dataset(first, cfg)?;
    let (mut observations, names) = dataset.into_parts();
    for path in iter {
        let next = load_dataset(path, cfg)?;
        if next.dataset.feature_names() != names.as_slice() {
            return Err(IngestError::HeaderMismatch { path: path.clone() });
        }
        skipped_rows += next.skipped_rows;
        dropped.extend(next.dropped);
        digests.extend(next.digests);
        observations.extend(next.dataset.into_parts().0);
    }
    Ok(Loaded { dataset: Dataset::new(observations, names)?, dropped, skipped_rows, digests })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Loaded, IngestError> {
        read_dataset(s.as_bytes(), &IngestConfig::default())
    }

    #[test]
    fn excludes_technical_columns() {
        let loaded = read("condition,session,side,flag,overflow,v1,v2\nONL,M1,L,0,0,1.5,2\nOC2.5,M2,R,1,0,3,4\n").unwrap();
        assert_eq!(loaded.dataset.feature_names(), ["v1", "v2"]);
        assert_eq!(loaded.dataset.observations()[1].condition, ConditionId::Oc25);
        assert_eq!(loaded.dataset.observations()[1].features, vec![3.0, 4.0]);
    }

    #[test]
    fn non_numeric_column_is_dropped() {
        let loaded = read("condition,session,v6,v7,v8\nONL,M1,1,2,3\nONL,M2,1,abc,3\nOC3,M1,1,2,3\n").unwrap();
        assert_eq!(loaded.dataset.feature_names(), ["v6", "v8"]);
        assert_eq!(loaded.dropped, vec![DroppedColumn { name: "v7".into(), value: "abc".into(), record: 2 }]);
    }

    #[test]
    fn non_finite_values_drop_the_column() {
        let loaded = read("condition,session,a,b\nONL,M1,NaN,1\nONL,M2,1,2\n").unwrap();
        assert_eq!(loaded.dataset.feature_names(), ["b"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(read("condition,session,v1\n"), Err(IngestError::EmptyDataset)));
        assert!(matches!(read("cond,session,v1\nONL,M1,1\n"), Err(IngestError::MissingColumn(c)) if c == "condition"));
        assert!(matches!(
            read("condition,session,v1\nONL,M1,1\nONL,M2\n"),
            Err(IngestError::RaggedRows { record: 2, expected: 3, found: 2 })
        ));
    }

    #[test]
    fn unknown_labels_are_skipped() {
        let loaded = read("condition,session,v1\nONL,M1,1\nXYZ,M1,2\nONL,M3,3\n").unwrap();
        assert_eq!(loaded.dataset.len(), 1);
        assert_eq!(loaded.skipped_rows, 2);
    }

    #[test]
    fn comment_lines_are_ignored() {
        let loaded = read("# provenance line\ncondition,session,v1\nONL,M1,1\n").unwrap();
        assert_eq!(loaded.dataset.len(), 1);
    }
}
