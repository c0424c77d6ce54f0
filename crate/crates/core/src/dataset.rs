//! Typed observations indexed by occlusal condition and session.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The six occlusal probes applied during gait acquisition.
///
/// Declaration order is the canonical order used for tie-breaking and
/// for laying out every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "ONL")]
    Onl,
    #[serde(rename = "OBL")]
    Obl,
    #[serde(rename = "OSL")]
    Osl,
    #[serde(rename = "OC2.5")]
    Oc25,
    #[serde(rename = "OC3")]
    Oc3,
    #[serde(rename = "OC3P")]
    Oc3p,
}

impl ConditionId {
    pub const ALL: [ConditionId; 6] = [
        ConditionId::Onl,
        ConditionId::Obl,
        ConditionId::Osl,
        ConditionId::Oc25,
        ConditionId::Oc3,
        ConditionId::Oc3p,
    ];

    /// The vertical-dimension set shared with the earlier retrospective analysis.
    pub const CORE: [ConditionId; 3] = [ConditionId::Onl, ConditionId::Oc25, ConditionId::Oc3];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::Onl => "ONL",
            ConditionId::Obl => "OBL",
            ConditionId::Osl => "OSL",
            ConditionId::Oc25 => "OC2.5",
            ConditionId::Oc3 => "OC3",
            ConditionId::Oc3p => "OC3P",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError(pub String);

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unrecognised label {:?}", self.0)
    }
}

impl core::error::Error for ParseLabelError {}

impl FromStr for ConditionId {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        let t = s.trim();
        ConditionId::ALL
            .into_iter()
            .find(|c| c.as_str() == t)
            .ok_or_else(|| ParseLabelError(String::from(t)))
    }
}

/// Measurement session. `M1` precedes `M2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionId {
    M1,
    M2,
}

impl SessionId {
    pub const ALL: [SessionId; 2] = [SessionId::M1, SessionId::M2];

    pub fn as_str(self) -> &'static str {
        match self {
            SessionId::M1 => "M1",
            SessionId::M2 => "M2",
        }
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SessionId {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.trim() {
            "M1" => Ok(SessionId::M1),
            "M2" => Ok(SessionId::M2),
            other => Err(ParseLabelError(String::from(other))),
        }
    }
}

/// One gait recording row.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub condition: ConditionId,
    pub session: SessionId,
    pub features: Vec<f64>,
}

/// Observations in ingestion order plus per-cell counts.
///
/// Row order is significant: computational M1/M2 pairs are formed by
/// position within each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    feature_names: Vec<String>,
    counts: BTreeMap<(ConditionId, SessionId), usize>,
}

impl Dataset {
    /// Validates feature lengths and finiteness, then indexes cell counts.
    pub fn new(observations: Vec<Observation>, feature_names: Vec<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let width = feature_names.len();
        for (index, obs) in observations.iter().enumerate() {
            if obs.features.len() != width {
                return Err(Error::RaggedFeatures { index, expected: width, found: obs.features.len() });
            }
            if obs.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { index });
            }
        }
        let counts = count_cells(&observations);
        Ok(Self { observations, feature_names, counts })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn counts(&self) -> &BTreeMap<(ConditionId, SessionId), usize> {
        &self.counts
    }

    pub fn count(&self, condition: ConditionId, session: SessionId) -> usize {
        self.counts.get(&(condition, session)).copied().unwrap_or(0)
    }

    /// Conditions present in the dataset, in canonical order.
    pub fn conditions(&self) -> BTreeSet<ConditionId> {
        self.counts.keys().map(|&(c, _)| c).collect()
    }

    pub fn into_parts(self) -> (Vec<Observation>, Vec<String>) {
        (self.observations, self.feature_names)
    }

    /// Drops the named feature columns, keeping the remaining order.
    ///
    /// Names not present among the features are ignored; callers pass
    /// technical columns (`side`, `flag`, ...) that may already be gone.
    pub fn select_features<S: AsRef<str>>(&self, exclude: &[S]) -> Result<Dataset> {
        let keep: Vec<usize> = self
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, name)| !exclude.iter().any(|e| e.as_ref() == name.as_str()))
            .map(|(i, _)| i)
            .collect();
        if keep.is_empty() {
            return Err(Error::AllFeaturesExcluded);
        }
        let feature_names = keep.iter().map(|&i| self.feature_names[i].clone()).collect();
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                condition: o.condition,
                session: o.session,
                features: keep.iter().map(|&i| o.features[i]).collect(),
            })
            .collect();
        Ok(Dataset { observations, feature_names, counts: self.counts.clone() })
    }

    /// Keeps only observations whose condition is in `keep`.
    pub fn subset_conditions(&self, keep: &BTreeSet<ConditionId>) -> Result<Dataset> {
        if keep.is_empty() {
            return Err(Error::InvalidConfig("condition subset is empty".into()));
        }
        let observations: Vec<Observation> =
            self.observations.iter().filter(|o| keep.contains(&o.condition)).cloned().collect();
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let counts = count_cells(&observations);
        Ok(Dataset { observations, feature_names: self.feature_names.clone(), counts })
    }
}

fn count_cells(observations: &[Observation]) -> BTreeMap<(ConditionId, SessionId), usize> {
    let mut counts = BTreeMap::new();
    for o in observations {
        *counts.entry((o.condition, o.session)).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{}", i + 1)).collect()
    }

    fn obs(c: ConditionId, s: SessionId, f: Vec<f64>) -> Observation {
        Observation { condition: c, session: s, features: f }
    }

    #[test]
    fn condition_labels_round_trip() {
        for c in ConditionId::ALL {
            assert_eq!(c.as_str().parse::<ConditionId>().unwrap(), c);
        }
        assert_eq!("OC2.5".parse::<ConditionId>().unwrap(), ConditionId::Oc25);
        assert!("OC25".parse::<ConditionId>().is_err());
        assert_eq!(format!("{}", ConditionId::Oc25), "OC2.5");
        assert!(SessionId::M1 < SessionId::M2);
        assert_eq!(" M2 ".parse::<SessionId>().unwrap(), SessionId::M2);
    }

    #[test]
    fn new_rejects_bad_rows() {
        assert_eq!(Dataset::new(vec![], names(2)), Err(Error::EmptyDataset));
        let ragged = vec![obs(ConditionId::Onl, SessionId::M1, vec![1.0])];
        assert!(matches!(Dataset::new(ragged, names(2)), Err(Error::RaggedFeatures { .. })));
        let nan = vec![obs(ConditionId::Onl, SessionId::M1, vec![1.0, f64::NAN])];
        assert!(matches!(Dataset::new(nan, names(2)), Err(Error::NonFiniteFeature { index: 0 })));
    }

    #[test]
    fn select_features_drops_named_columns() {
        let mut n = names(3);
        n.extend(["side", "flag", "overflow"].iter().map(|s| String::from(*s)));
        let ds = Dataset::new(
            vec![obs(ConditionId::Onl, SessionId::M1, vec![1.0, 2.0, 3.0, 0.0, 1.0, 9.0])],
            n,
        )
        .unwrap();
        let out = ds.select_features(&["side", "flag", "overflow"]).unwrap();
        assert_eq!(out.feature_names(), &names(3)[..]);
        assert_eq!(out.observations()[0].features, vec![1.0, 2.0, 3.0]);

        let same = ds.select_features::<&str>(&[]).unwrap();
        assert_eq!(same, ds);

        let all: Vec<String> = ds.feature_names().to_vec();
        assert_eq!(ds.select_features(&all), Err(Error::AllFeaturesExcluded));
    }

    #[test]
    fn subset_recounts() {
        let rows = vec![
            obs(ConditionId::Onl, SessionId::M1, vec![0.0]),
            obs(ConditionId::Obl, SessionId::M1, vec![1.0]),
            obs(ConditionId::Onl, SessionId::M2, vec![2.0]),
        ];
        let ds = Dataset::new(rows, names(1)).unwrap();
        let onl = ds.subset_conditions(&[ConditionId::Onl].into_iter().collect()).unwrap();
        assert_eq!(onl.len(), 2);
        assert_eq!(onl.count(ConditionId::Obl, SessionId::M1), 0);
        assert_eq!(onl.count(ConditionId::Onl, SessionId::M2), 1);

        let all = ds.subset_conditions(&ConditionId::ALL.into_iter().collect()).unwrap();
        assert_eq!(all, ds);

        let missing = ds.subset_conditions(&[ConditionId::Oc3].into_iter().collect());
        assert_eq!(missing, Err(Error::EmptyDataset));
    }
}
