//! Synthetic datasets with a planted latent plane and known M1 -> M2 shifts.
//!
//! Observations are built directly in standardized units. The planted
//! plane is spanned by two feature-space directions whose per-feature
//! loadings all have the same magnitude and sit at +/-45 degrees to the
//! principal axes of the planted cell means. With that layout every
//! feature has the same variance, so z-scoring rescales the plane
//! uniformly; the spread of the condition offsets is then solved so
//! that this variance is exactly one. Fitted PC1/PC2 distances therefore
//! reproduce planted distances (up to noise), which is what makes the
//! generator usable as an end-to-end oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, Dataset, Observation, SessionId};
use crate::metrics::{self, Ranking, DEFAULT_TIE_TOL};
use crate::pairing::encode_condition;
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub m1: usize,
    pub m2: usize,
}

impl CellCounts {
    pub fn get(&self, s: SessionId) -> usize {
        match s {
            SessionId::M1 => self.m1,
            SessionId::M2 => self.m2,
        }
    }
}

/// How the planted M1 -> M2 shift of each condition is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftModel {
    /// Shifts are taken verbatim from `planted_shifts`.
    Free,
    /// `shift = matrix * [dental, open, clench, vdo_deg, protrusion_mm, transition]`.
    LinearInDescriptors { matrix: [[f64; 6]; 2] },
}

impl ShiftModel {
    pub fn default_linear() -> Self {
        ShiftModel::LinearInDescriptors { matrix: DEFAULT_LINEAR_MATRIX }
    }
}

const DEFAULT_LINEAR_MATRIX: [[f64; 6]; 2] = [[1.0, 1.5, -0.8, 0.4, 0.3, 0.5], [0.5, -0.5, 0.3, 0.2, -0.4, 0.2]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_features: usize,
    pub counts: BTreeMap<ConditionId, CellCounts>,
    pub base_point: [f64; 2],
    /// Relative condition positions; rescaled so features have unit variance.
    pub condition_offsets: BTreeMap<ConditionId, [f64; 2]>,
    pub planted_shifts: BTreeMap<ConditionId, [f64; 2]>,
    /// Isotropic noise in every feature, in standardized units.
    pub noise_sigma: f64,
    /// Std of a single off-plane distractor direction, relative to `noise_sigma`.
    pub distractor_ratio: f64,
    pub shift_model: ShiftModel,
}

fn polar(radius: f64, degrees: f64) -> [f64; 2] {
    let t = degrees.to_radians();
    [radius * libm::cos(t), radius * libm::sin(t)]
}

/// Observation counts per condition and session of the reference recordings.
pub fn reference_counts() -> BTreeMap<ConditionId, CellCounts> {
    use ConditionId::*;
    [(Onl, 50, 60), (Obl, 33, 57), (Osl, 46, 58), (Oc25, 41, 60), (Oc3, 51, 57), (Oc3p, 49, 62)]
        .into_iter()
        .map(|(c, m1, m2)| (c, CellCounts { m1, m2 }))
        .collect()
}

impl Default for SynthSpec {
    fn default() -> Self {
        use ConditionId::*;
        // ONL, OC2.5 and OC3 form one equilateral triangle, the other three the
        // interleaved one, so both the core and the six-probe subsets are
        // close to isotropic.
        let condition_offsets =
            [(Onl, 0.0), (Obl, 60.0), (Oc25, 120.0), (Osl, 180.0), (Oc3, 240.0), (Oc3p, 300.0)]
                .into_iter()
                .map(|(c, a)| (c, polar(1.0, a)))
                .collect();
        let planted_shifts = [
            (Onl, 2.0, 20.0),
            (Obl, 3.5, 200.0),
            (Osl, 0.5, 110.0),
            (Oc25, 3.0, 65.0),
            (Oc3, 1.0, -40.0),
            (Oc3p, 1.5, 150.0),
        ]
        .into_iter()
        .map(|(c, r, a)| (c, polar(r, a)))
        .collect();
        Self {
            seed: 42,
            n_features: 60,
            counts: reference_counts(),
            base_point: [0.5, -0.25],
            condition_offsets,
            planted_shifts,
            noise_sigma: 0.3,
            distractor_ratio: 0.5,
            shift_model: ShiftModel::Free,
        }
    }
}

impl SynthSpec {
    /// Shift of every condition the spec defines one for.
    pub fn effective_shifts(&self) -> BTreeMap<ConditionId, [f64; 2]> {
        match &self.shift_model {
            ShiftModel::Free => self.planted_shifts.clone(),
            ShiftModel::LinearInDescriptors { matrix } => self
                .counts
                .keys()
                .map(|&c| {
                    let d = encode_condition(c).to_array();
                    let x = [d[0], d[1], d[2], d[3], d[4], 1.0];
                    let row = |r: &[f64; 6]| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                    (c, [row(&matrix[0]), row(&matrix[1])])
                })
                .collect(),
        }
    }

    fn active_conditions(&self) -> Vec<ConditionId> {
        self.counts.iter().filter(|(_, n)| n.m1 + n.m2 > 0).map(|(c, _)| *c).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_features < 4 || self.n_features % 2 != 0 {
            return bad(format!("n_features must be even and >= 4, got {}", self.n_features));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be finite and non-negative, got {}", self.noise_sigma));
        }
        if !(self.distractor_ratio.is_finite() && self.distractor_ratio >= 0.0) {
            return bad(format!("distractor_ratio must be finite and non-negative, got {}", self.distractor_ratio));
        }
        let active = self.active_conditions();
        if active.is_empty() {
            return bad("counts are all zero".into());
        }
        let shifts = self.effective_shifts();
        for c in active {
            if !self.condition_offsets.contains_key(&c) {
                return bad(format!("no condition offset for {c}"));
            }
            if !shifts.contains_key(&c) {
                return bad(format!("no planted shift for {c}"));
            }
        }
        Ok(())
    }
}

/// What the generator planted, for checking recovered values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub shifts: BTreeMap<ConditionId, [f64; 2]>,
    pub shift_norms: BTreeMap<ConditionId, f64>,
    pub planted_ranking: Ranking,
    /// Factor applied to `condition_offsets`.
    pub offset_scale: f64,
    /// Latent position of every cell mean, relative to the overall mean.
    pub cell_means: Vec<(ConditionId, SessionId, [f64; 2])>,
}

/// Ascending by planted shift norm with the default tie tolerance.
pub fn planted_ranking(spec: &SynthSpec) -> Ranking {
    let norms: Vec<(ConditionId, f64)> =
        spec.effective_shifts().iter().map(|(c, s)| (*c, libm::hypot(s[0], s[1]))).collect();
    metrics::rank(&norms, DEFAULT_TIE_TOL)
}

struct Cell {
    condition: ConditionId,
    session: SessionId,
    n: usize,
    offset: [f64; 2],
    shift: [f64; 2],
}

fn weighted_mean(cells: &[Cell], total: f64, f: impl Fn(&Cell) -> [f64; 2]) -> [f64; 2] {
    let mut m = [0.0; 2];
    for c in cells {
        let v = f(c);
        m[0] += c.n as f64 * v[0] / total;
        m[1] += c.n as f64 * v[1] / total;
    }
    m
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    generate_with_truth(spec).map(|(ds, _)| ds)
}

pub fn generate_with_truth(spec: &SynthSpec) -> Result<(Dataset, PlantedTruth)> {
    spec.validate()?;
    let f = spec.n_features;
    let shifts = spec.effective_shifts();
    let cells: Vec<Cell> = spec
        .active_conditions()
        .into_iter()
        .flat_map(|c| {
            let counts = spec.counts[&c];
            let offset = spec.condition_offsets[&c];
            let shift = shifts[&c];
            SessionId::ALL.into_iter().map(move |s| Cell {
                condition: c,
                session: s,
                n: counts.get(s),
                offset,
                shift: if s == SessionId::M2 { shift } else { [0.0, 0.0] },
            })
        })
        .filter(|cell| cell.n > 0)
        .collect();
    let total = cells.iter().map(|c| c.n).sum::<usize>() as f64;

    // Total planted variance as a quadratic in the offset scale r.
    let o_bar = weighted_mean(&cells, total, |c| c.offset);
    let h_bar = weighted_mean(&cells, total, |c| c.shift);
    let (mut a, mut b, mut c0) = (0.0, 0.0, 0.0);
    for cell in &cells {
        let w = cell.n as f64 / total;
        let o = [cell.offset[0] - o_bar[0], cell.offset[1] - o_bar[1]];
        let h = [cell.shift[0] - h_bar[0], cell.shift[1] - h_bar[1]];
        a += w * (o[0] * o[0] + o[1] * o[1]);
        b += w * (o[0] * h[0] + o[1] * h[1]);
        c0 += w * (h[0] * h[0] + h[1] * h[1]);
    }
    let sigma = spec.noise_sigma;
    let distractor = spec.distractor_ratio * sigma;
    let target = f as f64 * (1.0 - sigma * sigma) - distractor * distractor;
    if a <= 0.0 || target <= c0 {
        return Err(Error::InvalidConfig(
            "planted shifts and noise leave no room for unit-variance features; reduce them or spread the offsets"
                .into(),
        ));
    }
    let offset_scale = (-b + libm::sqrt(b * b + a * (target - c0))) / a;

    let means: Vec<[f64; 2]> = cells
        .iter()
        .map(|c| {
            [
                spec.base_point[0] + offset_scale * c.offset[0] + c.shift[0],
                spec.base_point[1] + offset_scale * c.offset[1] + c.shift[1],
            ]
        })
        .collect();
    let grand = {
        let mut g = [0.0; 2];
        for (cell, m) in cells.iter().zip(&means) {
            g[0] += cell.n as f64 * m[0] / total;
            g[1] += cell.n as f64 * m[1] / total;
        }
        g
    };
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (cell, m) in cells.iter().zip(&means) {
        let w = cell.n as f64 / total;
        let (dx, dy) = (m[0] - grand[0], m[1] - grand[1]);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let phi = 0.5 * libm::atan2(2.0 * sxy, sxx - syy);
    let q1 = [libm::cos(phi), libm::sin(phi)];
    let q2 = [-q1[1], q1[0]];
    let inv_sqrt_f = 1.0 / libm::sqrt(f as f64);
    let loadings: Vec<[f64; 2]> = (0..f)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            [(q1[0] + s * q2[0]) * inv_sqrt_f, (q1[1] + s * q2[1]) * inv_sqrt_f]
        })
        .collect();

    // Off-plane distractor: +,+,-,- pattern orthogonalized against the plane.
    let mut w: Vec<f64> = (0..f).map(|j| if j % 4 < 2 { inv_sqrt_f } else { -inv_sqrt_f }).collect();
    for axis in 0..2 {
        let d: f64 = w.iter().zip(&loadings).map(|(x, l)| x * l[axis]).sum();
        w.iter_mut().zip(&loadings).for_each(|(x, l)| *x -= d * l[axis]);
    }
    let wn = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
    w.iter_mut().for_each(|x| *x /= wn);

    let mut rng = SplitMix64::new(spec.seed);
    let centers: Vec<f64> = (0..f).map(|_| rng.uniform(-50.0, 50.0)).collect();
    let scales: Vec<f64> = (0..f).map(|_| rng.uniform(0.5, 20.0)).collect();

    let mut observations = Vec::with_capacity(total as usize);
    for (cell, m) in cells.iter().zip(&means) {
        let z = [m[0] - grand[0], m[1] - grand[1]];
        for _ in 0..cell.n {
            let mut features = vec![0.0; f];
            for j in 0..f {
                let planted = loadings[j][0] * z[0] + loadings[j][1] * z[1];
                features[j] = planted + sigma * rng.normal();
            }
            let t = distractor * rng.normal();
            for j in 0..f {
                features[j] = centers[j] + scales[j] * (features[j] + t * w[j]);
            }
            observations.push(Observation { condition: cell.condition, session: cell.session, features });
        }
    }
    let names = (1..=f).map(|i| format!("v{i}")).collect();
    let dataset = Dataset::new(observations, names)?;

    let shift_norms = shifts.iter().map(|(c, s)| (*c, libm::hypot(s[0], s[1]))).collect();
    let truth = PlantedTruth {
        shifts,
        shift_norms,
        planted_ranking: planted_ranking(spec),
        offset_scale,
        cell_means: cells
            .iter()
            .zip(&means)
            .map(|(c, m)| (c.condition, c.session, [m[0] - grand[0], m[1] - grand[1]]))
            .collect(),
    };
    Ok((dataset, truth))
}
