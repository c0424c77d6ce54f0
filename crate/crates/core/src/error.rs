use alloc::string::String;

use crate::dataset::{ConditionId, SessionId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset contains no observations")]
    EmptyDataset,
    #[error("every feature column was excluded")]
    AllFeaturesExcluded,
    #[error("observation {index} has {found} features, expected {expected}")]
    RaggedFeatures { index: usize, expected: usize, found: usize },
    #[error("observation {index} contains a non-finite feature value")]
    NonFiniteFeature { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("PCA needs at least {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("PCA needs at least two features, found {0}")]
    TooFewFeatures(usize),
    #[error("no observations for {condition} at {session}")]
    NoObservations { condition: ConditionId, session: SessionId },
    #[error("condition mismatch: {expected} vs {found}")]
    ConditionMismatch { expected: ConditionId, found: ConditionId },
    #[error("session mismatch: expected {expected}, found {found}")]
    SessionMismatch { expected: SessionId, found: SessionId },
    #[error("no ONL reference centroid in session {0}")]
    MissingReference(SessionId),
    #[error("condition {0} is not part of the ranking")]
    UnknownCondition(ConditionId),
    #[error("no {session} observations available to pair for {condition}")]
    EmptySide { condition: ConditionId, session: SessionId },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("condition {condition} has {n_pairs} pairs, too few for a held-out split")]
    TooFewPairs { condition: ConditionId, n_pairs: usize },
    #[error("length mismatch: {left} predictions vs {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
