//! Latent-trajectory approximation for single-subject longitudinal gait data.
//!
//! The pipeline projects per-stride feature vectors onto a two-dimensional
//! PCA plane, measures how far each condition's centroid travels between
//! the two sessions, and fits a small feed-forward network that maps a
//! first-session latent point plus a condition descriptor onto the
//! second-session latent plane.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, reporting and
//! the command line live in the `latentry` crate.
#![no_std]

extern crate alloc;

mod error;
mod linalg;

pub mod dataset;
pub mod evaluation;
pub mod metrics;
pub mod mlp;
pub mod pairing;
pub mod preprocess;
pub mod rng;
pub mod synth;

pub use dataset::{ConditionId, Dataset, Observation, SessionId};
pub use error::Error;
pub use evaluation::{EvalSettings, EvaluationReport, Protocol, SplitRule, SplitSpec};
pub use metrics::{Centroid, DisplacementRecord, Ranking, DEFAULT_TIE_TOL};
pub use mlp::{AdamState, ModelParams, TrainConfig};
pub use pairing::{DescriptorVector, TrainingPair, TransitionFlag};
pub use preprocess::{LatentPoint, PcaProjection, StandardizationParams};
pub use synth::{ShiftModel, SynthSpec};

pub type Result<T, E = Error> = core::result::Result<T, E>;
