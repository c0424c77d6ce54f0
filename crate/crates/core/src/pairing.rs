//! Computational M1/M2 pairs and the descriptor encoding of each condition.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, SessionId};
use crate::preprocess::LatentPoint;
use crate::{Error, Result};

/// Width of the network input: latent point, five descriptors, transition flag.
pub const INPUT_WIDTH: usize = 8;

/// Mechanical description of an occlusal probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub dental_contact: bool,
    pub open_mouth: bool,
    pub strong_clench: bool,
    pub vdo_increase_deg: f64,
    pub protrusion_mm: f64,
}

impl DescriptorVector {
    pub fn to_array(self) -> [f64; 5] {
        [
            f64::from(u8::from(self.dental_contact)),
            f64::from(u8::from(self.open_mouth)),
            f64::from(u8::from(self.strong_clench)),
            self.vdo_increase_deg,
            self.protrusion_mm,
        ]
    }
}

/// Indicator for the single M1 -> M2 transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionFlag(pub f64);

impl Default for TransitionFlag {
    fn default() -> Self {
        TransitionFlag(1.0)
    }
}

pub fn encode_condition(c: ConditionId) -> DescriptorVector {
    let (dental_contact, open_mouth, strong_clench, vdo_increase_deg, protrusion_mm) = match c {
        ConditionId::Onl => (true, false, false, 0.0, 0.0),
        ConditionId::Obl => (false, true, false, 0.0, 0.0),
        ConditionId::Osl => (true, false, true, 0.0, 0.0),
        ConditionId::Oc25 => (true, false, false, 2.5, 0.0),
        ConditionId::Oc3 => (true, false, false, 3.0, 0.0),
        ConditionId::Oc3p => (true, false, false, 3.0, 2.0),
    };
    DescriptorVector { dental_contact, open_mouth, strong_clench, vdo_increase_deg, protrusion_mm }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input_latent: [f64; 2],
    pub descriptor: DescriptorVector,
    pub transition: TransitionFlag,
    pub target_latent: [f64; 2],
    pub condition: ConditionId,
    pub pair_index: usize,
}

/// Network input for a latent point under `condition`:
/// `[pc1, pc2, dental_contact, open_mouth, strong_clench, vdo_deg, protrusion_mm, transition]`.
pub fn model_input(latent: [f64; 2], condition: ConditionId) -> [f64; INPUT_WIDTH] {
    let d = encode_condition(condition).to_array();
    [latent[0], latent[1], d[0], d[1], d[2], d[3], d[4], TransitionFlag::default().0]
}

pub fn assemble_input(p: &TrainingPair) -> [f64; INPUT_WIDTH] {
    let d = p.descriptor.to_array();
    [p.input_latent[0], p.input_latent[1], d[0], d[1], d[2], d[3], d[4], p.transition.0]
}

/// Index-aligns M1 and M2 points of one condition, truncating the longer side.
///
/// Points keep their ingestion order; pair `i` joins the `i`-th M1 point
/// with the `i`-th M2 point. This is a computational pairing, not a
/// stride-level correspondence.
pub fn build_pairs(m1: &[LatentPoint], m2: &[LatentPoint], condition: ConditionId) -> Result<Vec<TrainingPair>> {
    for (side, session) in [(m1, SessionId::M1), (m2, SessionId::M2)] {
        if side.is_empty() {
            return Err(Error::EmptySide { condition, session });
        }
        for p in side {
            if p.condition != condition {
                return Err(Error::ConditionMismatch { expected: condition, found: p.condition });
            }
            if p.session != session {
                return Err(Error::SessionMismatch { expected: session, found: p.session });
            }
        }
    }
    let descriptor = encode_condition(condition);
    Ok(m1
        .iter()
        .zip(m2)
        .enumerate()
        .map(|(pair_index, (a, b))| TrainingPair {
            input_latent: a.coords(),
            descriptor,
            transition: TransitionFlag::default(),
            target_latent: b.coords(),
            condition,
            pair_index,
        })
        .collect())
}

/// Splits projected points by cell and pairs every condition in `conditions`.
pub fn pairs_by_condition(
    points: &[LatentPoint],
    conditions: impl IntoIterator<Item = ConditionId>,
) -> Result<Vec<(ConditionId, Vec<TrainingPair>)>> {
    conditions
        .into_iter()
        .map(|c| {
            let m1: Vec<LatentPoint> =
                points.iter().filter(|p| p.condition == c && p.session == SessionId::M1).copied().collect();
            let m2: Vec<LatentPoint> =
                points.iter().filter(|p| p.condition == c && p.session == SessionId::M2).copied().collect();
            Ok((c, build_pairs(&m1, &m2, c)?))
        })
        .collect()
}
