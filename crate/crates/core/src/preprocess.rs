//! Z-score standardization and the two-component PCA latent plane.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, Dataset, Observation, SessionId};
use crate::linalg::{dot, norm, symmetric_eigen, SquareMatrix};
use crate::{Error, Result};

/// Per-column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Indices of columns with zero spread; they standardize to 0.
    pub constant_columns: Vec<usize>,
}

impl StandardizationParams {
    /// Pass-through parameters (mean 0, std 1) for already standardized input.
    pub fn identity(n_features: usize) -> Self {
        Self { means: vec![0.0; n_features], stds: vec![1.0; n_features], constant_columns: Vec::new() }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Standardizes a single feature vector.
    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.means.len() {
            return Err(Error::DimensionMismatch { expected: self.means.len(), found: features.len() });
        }
        Ok(features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect())
    }
}

/// Fits means and divide-by-N standard deviations over every observation.
pub fn fit_standardization(ds: &Dataset) -> StandardizationParams {
    let n = ds.len() as f64;
    let width = ds.n_features();
    let mut means = vec![0.0; width];
    for o in ds.observations() {
        for (m, x) in means.iter_mut().zip(&o.features) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; width];
    for o in ds.observations() {
        for ((v, x), m) in vars.iter_mut().zip(&o.features).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    let mut constant_columns = Vec::new();
    let stds = vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = libm::sqrt(v / n);
            // Exact zero only: any spread at all is a real (if tiny) signal.
            if s == 0.0 {
                constant_columns.push(i);
            }
            s
        })
        .collect();
    StandardizationParams { means, stds, constant_columns }
}

/// Applies `sp` to every observation; feature names are unchanged.
pub fn standardize(ds: &Dataset, sp: &StandardizationParams) -> Result<Dataset> {
    if ds.n_features() != sp.n_features() {
        return Err(Error::DimensionMismatch { expected: sp.n_features(), found: ds.n_features() });
    }
    let observations = ds
        .observations()
        .iter()
        .map(|o| {
            Ok(Observation { condition: o.condition, session: o.session, features: sp.apply(&o.features)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(observations, ds.feature_names().to_vec())
}

/// The latent mapping: standardization followed by projection onto PC1/PC2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub axes: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub standardization: StandardizationParams,
    /// Set when fewer than two eigenvalues are non-zero; the missing axes
    /// are a deterministic orthonormal completion.
    pub rank_deficient: bool,
}

/// A projected observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub pc1: f64,
    pub pc2: f64,
    pub condition: ConditionId,
    pub session: SessionId,
}

impl LatentPoint {
    pub fn coords(&self) -> [f64; 2] {
        [self.pc1, self.pc2]
    }
}

/// Relative threshold below which an eigenvalue counts as zero.
const ZERO_EIGEN_RTOL: f64 = 1e-12;

/// Top-two principal axes of the population covariance of `ds_std`.
///
/// The covariance (F x F) is decomposed when N > F, otherwise the Gram
/// matrix (N x N). Axes follow the sign convention that the
/// largest-magnitude component is non-negative.
pub fn fit_pca(ds_std: &Dataset, standardization: StandardizationParams) -> Result<PcaProjection> {
    let n = ds_std.len();
    let f = ds_std.n_features();
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, found: n });
    }
    if f < 2 {
        return Err(Error::TooFewFeatures(f));
    }
    if standardization.n_features() != f {
        return Err(Error::DimensionMismatch { expected: standardization.n_features(), found: f });
    }

    let mut mean = vec![0.0; f];
    for o in ds_std.observations() {
        for (m, x) in mean.iter_mut().zip(&o.features) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = ds_std
        .observations()
        .iter()
        .map(|o| o.features.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let (values, mut axes) = if n > f { covariance_route(&centered, f) } else { gram_route(&centered, f) };

    let trace: f64 = values.iter().filter(|v| **v > 0.0).sum();
    let threshold = ZERO_EIGEN_RTOL * trace;
    let mut explained = [0.0; 2];
    let mut rank_deficient = false;
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(2);
    for k in 0..2 {
        let lambda = values.get(k).copied().unwrap_or(0.0);
        if lambda > threshold && lambda > 0.0 {
            explained[k] = lambda;
            kept.push(core::mem::take(&mut axes[k]));
        } else {
            rank_deficient = true;
            kept.push(orthonormal_completion(&kept, f));
        }
    }
    for axis in &mut kept {
        apply_sign_convention(axis);
    }
    let mut it = kept.into_iter();
    let axes = [it.next().unwrap(), it.next().unwrap()];
    Ok(PcaProjection { axes, explained_variance: explained, standardization, rank_deficient })
}

/// Standardize, then fit PCA, on the same dataset.
pub fn fit_projection(ds: &Dataset) -> Result<PcaProjection> {
    let sp = fit_standardization(ds);
    let std_ds = standardize(ds, &sp)?;
    fit_pca(&std_ds, sp)
}

fn covariance_route(centered: &[Vec<f64>], f: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = centered.len() as f64;
    let mut cov = SquareMatrix::zeros(f);
    for row in centered {
        for i in 0..f {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..f {
                cov.data[i * f + j] += ri * row[j];
            }
        }
    }
    for i in 0..f {
        for j in i..f {
            let v = cov.get(i, j) / n;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    let eig = symmetric_eigen(&cov);
    (eig.values, eig.vectors)
}

fn gram_route(centered: &[Vec<f64>], f: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = centered.len();
    let mut gram = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = dot(&centered[i], &centered[j]) / n as f64;
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let eig = symmetric_eigen(&gram);
    // If G u = lambda u then C (X^T u) = lambda (X^T u) with |X^T u|^2 = N lambda.
    let axes = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .take(2)
        .map(|(&lambda, u)| {
            let mut axis = vec![0.0; f];
            for (row, &ui) in centered.iter().zip(u) {
                for (a, x) in axis.iter_mut().zip(row) {
                    *a += x * ui;
                }
            }
            let len = norm(&axis);
            if lambda > 0.0 && len > 0.0 {
                axis.iter_mut().for_each(|a| *a /= len);
            }
            axis
        })
        .collect();
    (eig.values, axes)
}

/// First unit basis vector, Gram-Schmidt'd against `existing`, that keeps
/// most of its length.
fn orthonormal_completion(existing: &[Vec<f64>], f: usize) -> Vec<f64> {
    for k in 0..f {
        let mut v = vec![0.0; f];
        v[k] = 1.0;
        for e in existing {
            let d = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= d * y);
        }
        let len = norm(&v);
        if len > 0.5 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
    unreachable!("f >= 2 guarantees a completion")
}

fn apply_sign_convention(axis: &mut [f64]) {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

impl PcaProjection {
    pub fn n_features(&self) -> usize {
        self.standardization.n_features()
    }

    /// Latent coordinates of a raw feature vector.
    pub fn project_features(&self, features: &[f64]) -> Result<[f64; 2]> {
        let z = self.standardization.apply(features)?;
        Ok([dot(&self.axes[0], &z), dot(&self.axes[1], &z)])
    }

    pub fn project(&self, obs: &Observation) -> Result<LatentPoint> {
        let [pc1, pc2] = self.project_features(&obs.features)?;
        Ok(LatentPoint { pc1, pc2, condition: obs.condition, session: obs.session })
    }

    /// Projects every observation, preserving order.
    pub fn project_dataset(&self, ds: &Dataset) -> Result<Vec<LatentPoint>> {
        ds.observations().iter().map(|o| self.project(o)).collect()
    }
}

/// Free-function form of [`PcaProjection::project`].
pub fn project(obs: &Observation, p: &PcaProjection) -> Result<LatentPoint> {
    p.project(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    fn dataset(rows: &[&[f64]]) -> Dataset {
        let f = rows[0].len();
        let obs = rows
            .iter()
            .map(|r| Observation { condition: ConditionId::Onl, session: SessionId::M1, features: r.to_vec() })
            .collect();
        Dataset::new(obs, (0..f).map(|i| format!("v{i}")).collect::<Vec<String>>()).unwrap()
    }

    #[test]
    fn standardization_of_one_two_three() {
        let ds = dataset(&[&[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]]);
        let sp = fit_standardization(&ds);
        assert_eq!(sp.means, vec![2.0, 5.0]);
        assert!((sp.stds[0] - libm::sqrt(2.0 / 3.0)).abs() < 1e-15);
        assert!((sp.stds[0] - 0.81650).abs() < 1e-5);
        assert_eq!(sp.stds[1], 0.0);
        assert_eq!(sp.constant_columns, vec![1]);

        let out = standardize(&ds, &sp).unwrap();
        let col: Vec<f64> = out.observations().iter().map(|o| o.features[0]).collect();
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in col.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(out.observations().iter().all(|o| o.features[1] == 0.0));
    }

    #[test]
    fn refit_on_standardized_is_identity() {
        let ds = dataset(&[&[1.0, 0.3], &[2.0, -1.0], &[7.0, 4.0], &[-3.0, 2.5]]);
        let once = standardize(&ds, &fit_standardization(&ds)).unwrap();
        let twice = standardize(&once, &fit_standardization(&once)).unwrap();
        for (a, b) in once.observations().iter().zip(twice.observations()) {
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardize_dimension_mismatch() {
        let ds = dataset(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let sp = StandardizationParams::identity(3);
        assert!(matches!(standardize(&ds, &sp), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let ds = dataset(&[&[2.0, 2.0], &[-2.0, -2.0], &[1.0, 1.0], &[-1.0, -1.0]]);
        let p = fit_pca(&ds, StandardizationParams::identity(2)).unwrap();
        let r = core::f64::consts::FRAC_1_SQRT_2;
        assert!((p.axes[0][0] - r).abs() < 1e-12 && (p.axes[0][1] - r).abs() < 1e-12);
        assert!((p.explained_variance[0] - 5.0).abs() < 1e-12);
        assert_eq!(p.explained_variance[1], 0.0);
        assert!(p.rank_deficient);
        assert!(dot(&p.axes[0], &p.axes[1]).abs() < 1e-12);
        assert!((norm(&p.axes[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_coordinate_is_first_axis() {
        let ds = dataset(&[
            &[10.0, 0.1, 0.0],
            &[-10.0, -0.1, 0.2],
            &[5.0, 0.2, -0.2],
            &[-5.0, -0.2, 0.0],
            &[0.0, 0.0, 0.1],
        ]);
        let p = fit_pca(&ds, StandardizationParams::identity(3)).unwrap();
        assert!((p.axes[0][0] - 1.0).abs() < 1e-3);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn gram_route_handles_wide_data() {
        // N = 4 <= F = 6 takes the Gram path.
        let ds = dataset(&[
            &[1.0, 0.0, 2.0, 0.5, -1.0, 0.0],
            &[0.0, 1.0, -1.0, 0.0, 2.0, 1.0],
            &[-1.0, 0.5, 0.0, 1.0, 0.0, -2.0],
            &[0.0, -1.5, -1.0, -1.5, -1.0, 1.0],
        ]);
        let p = fit_pca(&ds, StandardizationParams::identity(6)).unwrap();
        assert!(!p.rank_deficient);
        for a in &p.axes {
            assert!((norm(a) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&p.axes[0], &p.axes[1]).abs() < 1e-12);
    }

    #[test]
    fn projection_of_means_is_origin() {
        let ds = dataset(&[&[1.0, 4.0, 0.0], &[3.0, 2.0, 1.0], &[2.0, 9.0, 5.0], &[6.0, 1.0, 2.0]]);
        let p = fit_projection(&ds).unwrap();
        let z = p.project_features(&p.standardization.means.clone()).unwrap();
        assert!(z[0].abs() < 1e-12 && z[1].abs() < 1e-12);

        // means + axis0 in standardized coordinates projects to (1, 0).
        let raw: Vec<f64> = (0..3)
            .map(|i| p.standardization.means[i] + p.axes[0][i] * p.standardization.stds[i])
            .collect();
        let z = p.project_features(&raw).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10 && z[1].abs() < 1e-10);

        let mut swapped = p.clone();
        swapped.axes.swap(0, 1);
        let obs = &ds.observations()[2];
        let a = p.project(obs).unwrap();
        let b = project(obs, &swapped).unwrap();
        assert_eq!((a.pc1, a.pc2), (b.pc2, b.pc1));
        assert!(matches!(p.project_features(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
