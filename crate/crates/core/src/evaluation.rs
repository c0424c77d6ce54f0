//! Internal evaluation protocols: full-dataset, held-out pairs,
//! leave-condition-out, and the within-session ONL-relative hierarchy.
//!
//! Every protocol fits standardization and PCA on the whole analysis
//! subset (held-out rows included) and never looks at rows of conditions
//! outside that subset.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, Dataset, SessionId};
use crate::metrics::{self, distance, mean_point, Centroid, DisplacementRecord, Ranking, DEFAULT_TIE_TOL};
use crate::mlp::{self, ModelParams, TrainConfig};
use crate::pairing::{pairs_by_condition, TrainingPair};
use crate::preprocess::{fit_projection, LatentPoint, PcaProjection};
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Full,
    HeldOut,
    LeaveConditionOut,
    WithinSession,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Full => "full",
            Protocol::HeldOut => "held_out",
            Protocol::LeaveConditionOut => "leave_condition_out",
            Protocol::WithinSession => "within_session",
        }
    }
}

/// How held-out pairs are chosen within each condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Seeded uniform draw without replacement.
    Random,
    /// The last `k` pairs in ingestion order.
    LastK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub holdout_fraction: f64,
    pub seed: u64,
    pub rule: SplitRule,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { holdout_fraction: 0.2, seed: 42, rule: SplitRule::Random }
    }
}

/// Held-out count for `n_pairs` pairs: `ceil(fraction * n_pairs)`.
///
/// The product is nudged down by 1e-9 first so that, e.g., `0.2 * 35`
/// (which rounds to 7.000000000000001) yields 7 rather than 8.
pub fn heldout_count(n_pairs: usize, fraction: f64) -> usize {
    libm::ceil(fraction * n_pairs as f64 - 1e-9) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub train: TrainConfig,
    pub tie_tol: f64,
    /// Orderings to test, lowest displacement first.
    pub hierarchies: Vec<Vec<ConditionId>>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            tie_tol: DEFAULT_TIE_TOL,
            hierarchies: alloc::vec![core_hierarchy()],
        }
    }
}

/// `d(OC3) < d(ONL) < d(OC2.5)`.
pub fn core_hierarchy() -> Vec<ConditionId> {
    alloc::vec![ConditionId::Oc3, ConditionId::Onl, ConditionId::Oc25]
}

pub fn hierarchy_label(h: &[ConditionId]) -> String {
    h.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" < ")
}

/// One condition's line in a protocol report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: ConditionId,
    /// Observations (full protocol: M2 observations) or pairs evaluated.
    pub n_eval: usize,
    pub d_obs: f64,
    pub d_pred: Option<f64>,
    pub e_centroid: Option<f64>,
    pub pointwise_rmse: Option<f64>,
}

impl ConditionRow {
    pub fn record(&self) -> DisplacementRecord {
        DisplacementRecord { condition: self.condition, d_obs: self.d_obs, d_pred: self.d_pred, e_centroid: self.e_centroid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WithinSessionRow {
    pub condition: ConditionId,
    pub m1_dist: f64,
    pub m1_rank: usize,
    pub m2_dist: f64,
    pub m2_rank: usize,
    pub displacement: f64,
    pub long_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    /// Conditions of the analysis subset (PCA scope).
    pub conditions: Vec<ConditionId>,
    /// Withheld condition of a leave-condition-out fold.
    pub withheld: Option<ConditionId>,
    pub rows: Vec<ConditionRow>,
    pub global_rmse: Option<f64>,
    pub observed_ranking: Option<Ranking>,
    pub predicted_ranking: Option<Ranking>,
    pub hierarchy_flags: BTreeMap<String, bool>,
    pub within_session: Vec<WithinSessionRow>,
    pub n_train_pairs: usize,
    pub final_loss: Option<f64>,
}

impl EvaluationReport {
    fn new(protocol: Protocol, conditions: &BTreeSet<ConditionId>) -> Self {
        Self {
            protocol,
            conditions: conditions.iter().copied().collect(),
            withheld: None,
            rows: Vec::new(),
            global_rmse: None,
            observed_ranking: None,
            predicted_ranking: None,
            hierarchy_flags: BTreeMap::new(),
            within_session: Vec::new(),
            n_train_pairs: 0,
            final_loss: None,
        }
    }

    pub fn row(&self, condition: ConditionId) -> Option<&ConditionRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    fn rank_rows(&mut self, settings: &EvalSettings) -> Result<()> {
        let observed: Vec<_> = self.rows.iter().map(|r| (r.condition, r.d_obs)).collect();
        let predicted: Option<Vec<_>> = self.rows.iter().map(|r| r.d_pred.map(|d| (r.condition, d))).collect();
        let observed = metrics::rank(&observed, settings.tie_tol);
        let predicted = predicted.map(|p| metrics::rank(&p, settings.tie_tol));
        for h in &settings.hierarchies {
            if h.iter().all(|c| self.row(*c).is_some()) {
                let label = hierarchy_label(h);
                self.hierarchy_flags.insert(format!("observed: {label}"), metrics::hierarchy_satisfied(&observed, h)?);
                if let Some(p) = &predicted {
                    self.hierarchy_flags.insert(format!("predicted: {label}"), metrics::hierarchy_satisfied(p, h)?);
                }
            }
        }
        self.observed_ranking = Some(observed);
        self.predicted_ranking = predicted;
        Ok(())
    }
}

/// Projection, latent points and per-condition pairs of one analysis subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub conditions: BTreeSet<ConditionId>,
    pub projection: PcaProjection,
    pub points: Vec<LatentPoint>,
    pub pairs: Vec<(ConditionId, Vec<TrainingPair>)>,
}

impl Prepared {
    pub fn all_pairs(&self) -> Vec<TrainingPair> {
        self.pairs.iter().flat_map(|(_, p)| p.iter().copied()).collect()
    }

    pub fn pairs_of(&self, condition: ConditionId) -> &[TrainingPair] {
        self.pairs.iter().find(|(c, _)| *c == condition).map(|(_, p)| p.as_slice()).unwrap_or(&[])
    }

    fn points_of(&self, condition: ConditionId, session: SessionId) -> Vec<LatentPoint> {
        self.points.iter().filter(|p| p.condition == condition && p.session == session).copied().collect()
    }
}

fn project_subset(ds: &Dataset, conditions: &BTreeSet<ConditionId>) -> Result<(PcaProjection, Vec<LatentPoint>)> {
    let subset = ds.subset_conditions(conditions)?;
    let projection = fit_projection(&subset)?;
    let points = projection.project_dataset(&subset)?;
    Ok((projection, points))
}

/// Fits the latent plane on `conditions` only and builds all pairs.
pub fn prepare(ds: &Dataset, conditions: &BTreeSet<ConditionId>) -> Result<Prepared> {
    let (projection, points) = project_subset(ds, conditions)?;
    let pairs = pairs_by_condition(&points, conditions.iter().copied())?;
    Ok(Prepared { conditions: conditions.clone(), projection, points, pairs })
}

/// Output of the full-dataset protocol, including the trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRun {
    pub report: EvaluationReport,
    pub prepared: Prepared,
    pub params: ModelParams,
    pub loss_history: Vec<f64>,
    pub predictions: Vec<LatentPoint>,
}

/// Trains once on every pair and predicts M2 from every M1 point.
pub fn run_full(ds: &Dataset, conditions: &BTreeSet<ConditionId>, settings: &EvalSettings) -> Result<FullRun> {
    let prepared = prepare(ds, conditions)?;
    let train_pairs = prepared.all_pairs();
    let (params, loss_history) = mlp::train(&train_pairs, &settings.train)?;

    let mut report = EvaluationReport::new(Protocol::Full, conditions);
    report.n_train_pairs = train_pairs.len();
    report.final_loss = loss_history.last().copied();
    let mut predictions = Vec::new();
    for &c in conditions {
        let m1 = metrics::centroid(&prepared.points, c, SessionId::M1)?;
        let m2 = metrics::centroid(&prepared.points, c, SessionId::M2)?;
        let pred_points = mlp::predict_m2(&params, &prepared.points_of(c, SessionId::M1), c)?;
        let pred = metrics::centroid(&pred_points, c, SessionId::M2)?;
        report.rows.push(ConditionRow {
            condition: c,
            n_eval: m2.n,
            d_obs: metrics::observed_displacement(&m1, &m2)?,
            d_pred: Some(metrics::observed_displacement(&m1, &pred)?),
            e_centroid: Some(metrics::centroid_error(&pred, &m2)?),
            pointwise_rmse: None,
        });
        predictions.extend(pred_points);
    }
    report.rank_rows(settings)?;
    Ok(FullRun { report, prepared, params, loss_history, predictions })
}

pub fn eval_full(ds: &Dataset, conditions: &BTreeSet<ConditionId>, settings: &EvalSettings) -> Result<EvaluationReport> {
    run_full(ds, conditions, settings).map(|r| r.report)
}

/// Partitions each condition's pairs into (train, held-out).
///
/// Both outputs keep canonical condition order and ingestion order within
/// a condition.
pub fn split_held_out(
    pairs: &[(ConditionId, Vec<TrainingPair>)],
    spec: &SplitSpec,
) -> Result<(Vec<TrainingPair>, Vec<TrainingPair>)> {
    if !(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("holdout fraction {} not in (0, 1)", spec.holdout_fraction)));
    }
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for (condition, cond_pairs) in pairs {
        let n = cond_pairs.len();
        let k = heldout_count(n, spec.holdout_fraction);
        if k == 0 || k >= n {
            return Err(Error::TooFewPairs { condition: *condition, n_pairs: n });
        }
        let mut held = alloc::vec![false; n];
        match spec.rule {
            SplitRule::LastK => held[n - k..].iter_mut().for_each(|h| *h = true),
            SplitRule::Random => {
                let mut rng = SplitMix64::stream(spec.seed, condition.index() as u64);
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..k {
                    let j = i + rng.below(n - i);
                    idx.swap(i, j);
                    held[idx[i]] = true;
                }
            }
        }
        for (p, h) in cond_pairs.iter().zip(held) {
            if h { heldout.push(*p) } else { train.push(*p) }
        }
    }
    Ok((train, heldout))
}

fn rmse_coords(pred: &[[f64; 2]], target: &[[f64; 2]]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: target.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = pred.iter().zip(target).map(|(a, b)| distance(*a, *b) * distance(*a, *b)).sum();
    Ok(libm::sqrt(sum / pred.len() as f64))
}

/// Root mean squared 2-D error between index-aligned predictions and targets.
pub fn pointwise_rmse(pred: &[LatentPoint], target: &[LatentPoint]) -> Result<f64> {
    let p: Vec<_> = pred.iter().map(LatentPoint::coords).collect();
    let t: Vec<_> = target.iter().map(LatentPoint::coords).collect();
    rmse_coords(&p, &t)
}

/// Centroid metrics and RMSE over one condition's evaluation pairs.
///
/// All centroids are taken over the same pair set, so
/// `e_centroid <= pointwise_rmse` holds by construction.
fn pair_row(condition: ConditionId, pairs: &[TrainingPair], preds: &[[f64; 2]]) -> Result<ConditionRow> {
    let inputs: Vec<[f64; 2]> = pairs.iter().map(|p| p.input_latent).collect();
    let targets: Vec<[f64; 2]> = pairs.iter().map(|p| p.target_latent).collect();
    let (m1, _) = mean_point(&inputs).ok_or(Error::EmptyBatch)?;
    let (m2, n) = mean_point(&targets).ok_or(Error::EmptyBatch)?;
    let (pred, _) = mean_point(preds).ok_or(Error::EmptyBatch)?;
    let as_centroid = |c: [f64; 2], session| Centroid { condition, session, pc1: c[0], pc2: c[1], n };
    let (c_m1, c_m2, c_pred) = (as_centroid(m1, SessionId::M1), as_centroid(m2, SessionId::M2), as_centroid(pred, SessionId::M2));
    Ok(ConditionRow {
        condition,
        n_eval: n,
        d_obs: metrics::observed_displacement(&c_m1, &c_m2)?,
        d_pred: Some(metrics::observed_displacement(&c_m1, &c_pred)?),
        e_centroid: Some(metrics::centroid_error(&c_pred, &c_m2)?),
        pointwise_rmse: Some(rmse_coords(preds, &targets)?),
    })
}

/// Trains on the non-held-out pairs and scores the held-out ones.
pub fn eval_held_out(
    ds: &Dataset,
    conditions: &BTreeSet<ConditionId>,
    settings: &EvalSettings,
    split: &SplitSpec,
) -> Result<EvaluationReport> {
    let prepared = prepare(ds, conditions)?;
    let (train_pairs, heldout) = split_held_out(&prepared.pairs, split)?;
    let (params, history) = mlp::train(&train_pairs, &settings.train)?;

    let mut report = EvaluationReport::new(Protocol::HeldOut, conditions);
    report.n_train_pairs = train_pairs.len();
    report.final_loss = history.last().copied();
    let mut all_preds = Vec::new();
    let mut all_targets = Vec::new();
    for &c in conditions {
        let held: Vec<TrainingPair> = heldout.iter().filter(|p| p.condition == c).copied().collect();
        let preds = mlp::predict_pairs(&params, &held);
        report.rows.push(pair_row(c, &held, &preds)?);
        all_targets.extend(held.iter().map(|p| p.target_latent));
        all_preds.extend(preds);
    }
    report.global_rmse = Some(rmse_coords(&all_preds, &all_targets)?);
    report.rank_rows(settings)?;
    Ok(report)
}

/// Trains on every condition except `withheld` and scores all of its pairs.
pub fn leave_condition_out_fold(prepared: &Prepared, withheld: ConditionId, settings: &EvalSettings) -> Result<EvaluationReport> {
    let train_pairs: Vec<TrainingPair> = prepared
        .pairs
        .iter()
        .filter(|(c, _)| *c != withheld)
        .flat_map(|(_, p)| p.iter().copied())
        .collect();
    debug_assert!(train_pairs.iter().all(|p| p.condition != withheld));
    let (params, history) = mlp::train(&train_pairs, &settings.train)?;
    let eval_pairs = prepared.pairs_of(withheld);
    let preds = mlp::predict_pairs(&params, eval_pairs);

    let mut report = EvaluationReport::new(Protocol::LeaveConditionOut, &prepared.conditions);
    report.withheld = Some(withheld);
    report.n_train_pairs = train_pairs.len();
    report.final_loss = history.last().copied();
    let row = pair_row(withheld, eval_pairs, &preds)?;
    report.global_rmse = row.pointwise_rmse;
    report.rows.push(row);
    report.rank_rows(settings)?;
    Ok(report)
}

/// One fold per condition, in canonical order.
pub fn eval_leave_condition_out(
    ds: &Dataset,
    conditions: &BTreeSet<ConditionId>,
    settings: &EvalSettings,
) -> Result<Vec<EvaluationReport>> {
    if conditions.len() < 2 {
        return Err(Error::InvalidConfig("leave-condition-out needs at least two conditions".into()));
    }
    let prepared = prepare(ds, conditions)?;
    conditions.iter().map(|&c| leave_condition_out_fold(&prepared, c, settings)).collect()
}

/// ONL-relative distances per session plus the longitudinal displacement.
pub fn eval_within_session(
    ds: &Dataset,
    conditions: &BTreeSet<ConditionId>,
    settings: &EvalSettings,
) -> Result<EvaluationReport> {
    let (_, points) = project_subset(ds, conditions)?;
    within_session_from_points(&points, conditions, settings)
}

/// Within-session table from already projected points.
pub fn within_session_from_points(
    points: &[LatentPoint],
    conditions: &BTreeSet<ConditionId>,
    settings: &EvalSettings,
) -> Result<EvaluationReport> {
    let mut centroids = Vec::new();
    for &c in conditions {
        for s in SessionId::ALL {
            centroids.push(metrics::centroid(points, c, s)?);
        }
    }
    let m1 = metrics::within_session_distances(&centroids, SessionId::M1)?;
    let m2 = metrics::within_session_distances(&centroids, SessionId::M2)?;
    let r1 = metrics::rank(&m1, settings.tie_tol);
    let r2 = metrics::rank(&m2, settings.tie_tol);

    let mut report = EvaluationReport::new(Protocol::WithinSession, conditions);
    for (i, &c) in conditions.iter().enumerate() {
        let d = metrics::observed_displacement(&centroids[2 * i], &centroids[2 * i + 1])?;
        report.rows.push(ConditionRow { condition: c, n_eval: centroids[2 * i].n + centroids[2 * i + 1].n, d_obs: d, d_pred: None, e_centroid: None, pointwise_rmse: None });
    }
    report.rank_rows(settings)?;
    let long = report.observed_ranking.clone().expect("ranked above");
    for (&(c, d1), &(_, d2)) in m1.iter().zip(&m2) {
        let row = report.row(c).expect("row per condition");
        report.within_session.push(WithinSessionRow {
            condition: c,
            m1_dist: d1,
            m1_rank: r1.rank_of(c).expect("ranked"),
            m2_dist: d2,
            m2_rank: r2.rank_of(c).expect("ranked"),
            displacement: row.d_obs,
            long_rank: long.rank_of(c).expect("ranked"),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{encode_condition, TransitionFlag};
    use alloc::vec;
    use ConditionId::*;

    fn pairs(c: ConditionId, n: usize) -> Vec<TrainingPair> {
        (0..n)
            .map(|i| TrainingPair {
                input_latent: [i as f64, 0.0],
                descriptor: encode_condition(c),
                transition: TransitionFlag::default(),
                target_latent: [i as f64, 1.0],
                condition: c,
                pair_index: i,
            })
            .collect()
    }

    #[test]
    fn heldout_counts_use_ceiling() {
        let counts: Vec<usize> = [50, 33, 46, 41, 51, 49].iter().map(|&n| heldout_count(n, 0.2)).collect();
        assert_eq!(counts, vec![10, 7, 10, 9, 11, 10]);
        assert_eq!(heldout_count(5, 0.2), 1);
        assert_eq!(heldout_count(35, 0.2), 7);
    }

    #[test]
    fn split_partitions_each_condition() {
        let input = vec![(Onl, pairs(Onl, 50)), (Oc3, pairs(Oc3, 5))];
        let spec = SplitSpec::default();
        let (train, held) = split_held_out(&input, &spec).unwrap();
        assert_eq!(held.iter().filter(|p| p.condition == Onl).count(), 10);
        assert_eq!(held.iter().filter(|p| p.condition == Oc3).count(), 1);
        assert_eq!(train.len() + held.len(), 55);
        for c in [Onl, Oc3] {
            let mut idx: Vec<usize> =
                train.iter().chain(&held).filter(|p| p.condition == c).map(|p| p.pair_index).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), if c == Onl { 50 } else { 5 });
        }
        assert_eq!(split_held_out(&input, &spec).unwrap(), (train.clone(), held.clone()));
        let other = split_held_out(&input, &SplitSpec { seed: 7, ..spec }).unwrap();
        assert_ne!(other.1, held);

        let last = split_held_out(&input, &SplitSpec { rule: SplitRule::LastK, ..spec }).unwrap();
        assert_eq!(last.1.iter().filter(|p| p.condition == Onl).map(|p| p.pair_index).min(), Some(40));
    }

    #[test]
    fn split_rejects_single_pair() {
        let input = vec![(Obl, pairs(Obl, 1))];
        assert_eq!(split_held_out(&input, &SplitSpec::default()), Err(Error::TooFewPairs { condition: Obl, n_pairs: 1 }));
        let bad = SplitSpec { holdout_fraction: 1.0, ..SplitSpec::default() };
        assert!(matches!(split_held_out(&input, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rmse_cases() {
        let p = |x, y| LatentPoint { pc1: x, pc2: y, condition: Onl, session: SessionId::M2 };
        assert_eq!(pointwise_rmse(&[p(1.0, 1.0)], &[p(1.0, 1.0)]).unwrap(), 0.0);
        assert_eq!(pointwise_rmse(&[p(3.0, 4.0)], &[p(0.0, 0.0)]).unwrap(), 5.0);
        assert_eq!(pointwise_rmse(&[p(3.0, 4.0)], &[]), Err(Error::LengthMismatch { left: 1, right: 0 }));
    }

    #[test]
    fn rmse_on_training_pairs_matches_training_loss() {
        let ps = pairs(Oc25, 6);
        let params = mlp::init_params(9);
        let preds = mlp::predict_pairs(&params, &ps);
        let targets: Vec<_> = ps.iter().map(|p| p.target_latent).collect();
        let rmse = rmse_coords(&preds, &targets).unwrap();
        let l = mlp::loss(&params, &ps).unwrap();
        assert!((rmse - libm::sqrt(l)).abs() < 1e-12);
    }
}
