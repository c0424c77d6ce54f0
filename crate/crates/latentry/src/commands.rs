use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::Context;
use latentry_core::evaluation::{
    eval_held_out, leave_condition_out_fold, run_full, split_held_out, within_session_from_points, EvaluationReport,
    FullRun,
};
use latentry_core::preprocess::fit_projection;
use latentry_core::synth::{generate_with_truth, PlantedTruth, SynthSpec};
use latentry_core::{metrics, ConditionId, Dataset, EvalSettings, ModelParams, Ranking, SessionId};
use serde::Serialize;

use crate::config::{sha256_hex, ConfigError, Format, RunConfig};
use crate::ingest::{self, DroppedColumn, Loaded};
use crate::output::{f2, f6, opt2, Provenance, Table, Writer};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

fn settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings { train: cfg.train, tie_tol: cfg.tie_tol, ..EvalSettings::default() }
}

fn load(cfg: &RunConfig) -> anyhow::Result<(Loaded, Dataset)> {
    cfg.validate()?;
    let loaded = ingest::load_many(&cfg.inputs, &cfg.ingest)?;
    if loaded.skipped_rows > 0 {
        log::warn!("skipped {} rows with unrecognised condition or session", loaded.skipped_rows);
    }
    let subset = loaded.dataset.subset_conditions(&cfg.conditions)?;
    for &c in &cfg.conditions {
        for s in SessionId::ALL {
            if subset.count(c, s) == 0 {
                return Err(latentry_core::Error::NoObservations { condition: c, session: s }.into());
            }
        }
    }
    Ok((loaded, subset))
}

#[derive(Serialize)]
struct CountRow {
    condition: ConditionId,
    m1: usize,
    m2: usize,
}

fn count_rows(ds: &Dataset, conditions: &BTreeSet<ConditionId>) -> Vec<CountRow> {
    conditions
        .iter()
        .map(|&c| CountRow { condition: c, m1: ds.count(c, SessionId::M1), m2: ds.count(c, SessionId::M2) })
        .collect()
}

#[derive(Serialize)]
struct AnalyzeSummary<'a> {
    analysis: crate::config::Analysis,
    conditions: &'a BTreeSet<ConditionId>,
    n_observations: usize,
    n_features: usize,
    counts: Vec<CountRow>,
    dropped_columns: &'a [DroppedColumn],
    skipped_rows: usize,
    explained_variance: [f64; 2],
    rank_deficient: bool,
    observed_ranking: &'a Ranking,
    hierarchy_flags: &'a std::collections::BTreeMap<String, bool>,
}

#[derive(Serialize)]
struct PcaFile<'a> {
    feature_names: &'a [String],
    #[serde(flatten)]
    projection: &'a latentry_core::PcaProjection,
}

#[derive(Serialize)]
struct Rows<'a, T> {
    rows: &'a [T],
}

/// Projection, displacement and within-session tables for one analysis subset.
pub fn analyze(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let (loaded, ds) = load(cfg)?;
    let prov = Provenance::new("analyze", cfg, cfg.hash("analyze", &loaded.digests));
    let projection = fit_projection(&ds)?;
    if projection.rank_deficient {
        log::warn!("fewer than two non-zero principal components; the latent plane is partly arbitrary");
    }
    let points = projection.project_dataset(&ds)?;
    let report = within_session_from_points(&points, &cfg.conditions, &settings(cfg))?;
    let ranking = report.observed_ranking.as_ref().expect("within-session report is ranked");

    let mut w = Writer::new(&cfg.out, &prov)?;
    let mut disp = Table::new(&["condition", "n_m1", "n_m2", "displacement", "rank"]);
    for row in &report.rows {
        let c = row.condition;
        disp.push(vec![
            c.to_string(),
            ds.count(c, SessionId::M1).to_string(),
            ds.count(c, SessionId::M2).to_string(),
            f2(row.d_obs),
            ranking.rank_of(c).expect("ranked").to_string(),
        ]);
    }
    let mut within = Table::new(&["condition", "m1_dist", "m1_rank", "m2_dist", "m2_rank", "displacement", "long_rank"]);
    for r in &report.within_session {
        within.push(vec![
            r.condition.to_string(),
            f2(r.m1_dist),
            r.m1_rank.to_string(),
            f2(r.m2_dist),
            r.m2_rank.to_string(),
            f2(r.displacement),
            r.long_rank.to_string(),
        ]);
    }
    if cfg.formats.contains(&Format::Csv) {
        w.csv("displacements.csv", &disp)?;
        w.csv("within_session.csv", &within)?;
    }
    if cfg.formats.contains(&Format::Json) {
        w.json("displacements.json", &Rows { rows: &report.rows })?;
        w.json("within_session.json", &Rows { rows: &report.within_session })?;
    }
    w.json("pca.json", &PcaFile { feature_names: ds.feature_names(), projection: &projection })?;
    w.csv("latent_points.csv", &points_table(&points))?;
    w.csv("centroids.csv", &centroid_table(&points, &cfg.conditions)?)?;
    w.json(
        "summary.json",
        &AnalyzeSummary {
            analysis: cfg.analysis,
            conditions: &cfg.conditions,
            n_observations: ds.len(),
            n_features: ds.n_features(),
            counts: count_rows(&ds, &cfg.conditions),
            dropped_columns: &loaded.dropped,
            skipped_rows: loaded.skipped_rows,
            explained_variance: projection.explained_variance,
            rank_deficient: projection.rank_deficient,
            observed_ranking: ranking,
            hierarchy_flags: &report.hierarchy_flags,
        },
    )?;
    Ok(w.written)
}

fn points_table(points: &[latentry_core::LatentPoint]) -> Table {
    let mut t = Table::new(&["condition", "session", "index", "pc1", "pc2"]);
    let mut seen = std::collections::BTreeMap::new();
    for p in points {
        let i = seen.entry((p.condition, p.session)).or_insert(0usize);
        t.push(vec![p.condition.to_string(), p.session.to_string(), i.to_string(), f6(p.pc1), f6(p.pc2)]);
        *i += 1;
    }
    t
}

fn centroid_table(points: &[latentry_core::LatentPoint], conditions: &BTreeSet<ConditionId>) -> anyhow::Result<Table> {
    let mut t = Table::new(&["condition", "session", "n", "pc1", "pc2"]);
    for &c in conditions {
        for s in SessionId::ALL {
            let m = metrics::centroid(points, c, s)?;
            t.push(vec![c.to_string(), s.to_string(), m.n.to_string(), f6(m.pc1), f6(m.pc2)]);
        }
    }
    Ok(t)
}

fn report_table(r: &EvaluationReport) -> Table {
    let mut t = Table::new(&[
        "condition",
        "n_eval",
        "d_obs",
        "d_pred",
        "e_centroid",
        "pointwise_rmse",
        "observed_rank",
        "predicted_rank",
    ]);
    for row in &r.rows {
        let rank = |rk: &Option<Ranking>| rk.as_ref().and_then(|x| x.rank_of(row.condition)).map(|n| n.to_string()).unwrap_or_default();
        t.push(vec![
            row.condition.to_string(),
            row.n_eval.to_string(),
            f2(row.d_obs),
            opt2(row.d_pred),
            opt2(row.e_centroid),
            opt2(row.pointwise_rmse),
            rank(&r.observed_ranking),
            rank(&r.predicted_ranking),
        ]);
    }
    t
}

#[derive(Serialize)]
struct ModelFile<'a> {
    schema_version: u32,
    seed: u64,
    epochs: usize,
    lr: f64,
    params: &'a ModelParams,
}

#[derive(Serialize)]
struct FoldSummary {
    withheld: ConditionId,
    d_obs: f64,
    d_pred: Option<f64>,
    e_centroid: Option<f64>,
    pointwise_rmse: Option<f64>,
}

#[derive(Serialize)]
struct TrainEvalSummary<'a> {
    analysis: crate::config::Analysis,
    conditions: &'a BTreeSet<ConditionId>,
    counts: Vec<CountRow>,
    n_pairs: usize,
    dropped_columns: &'a [DroppedColumn],
    full_final_loss: Option<f64>,
    full_hierarchy_flags: &'a std::collections::BTreeMap<String, bool>,
    held_out_global_rmse: Option<f64>,
    held_out_hierarchy_flags: &'a std::collections::BTreeMap<String, bool>,
    leave_condition_out: Vec<FoldSummary>,
}

/// Runs every fold on its own thread; results come back in condition order.
fn leave_condition_out(full: &FullRun, settings: &EvalSettings) -> latentry_core::Result<Vec<EvaluationReport>> {
    let prepared = &full.prepared;
    thread::scope(|s| {
        let handles: Vec<_> = prepared
            .conditions
            .iter()
            .map(|&c| s.spawn(move || leave_condition_out_fold(prepared, c, settings)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
    })
}

/// Full, held-out and leave-condition-out evaluation with report files.
pub fn train_eval(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let (loaded, ds) = load(cfg)?;
    let prov = Provenance::new("train-eval", cfg, cfg.hash("train-eval", &loaded.digests));
    let settings = settings(cfg);

    let full = run_full(&ds, &cfg.conditions, &settings)?;
    let held = eval_held_out(&ds, &cfg.conditions, &settings, &cfg.split)?;
    let folds = if cfg.conditions.len() >= 2 {
        leave_condition_out(&full, &settings)?
    } else {
        log::warn!("leave-condition-out needs at least two conditions; skipped");
        Vec::new()
    };

    let mut w = Writer::new(&cfg.out, &prov)?;
    let mut reports = vec![("report_full".to_string(), &full.report), ("report_held_out".to_string(), &held)];
    for f in &folds {
        reports.push((format!("report_loco_{}", f.withheld.expect("fold has a withheld condition")), f));
    }
    for (name, report) in &reports {
        if cfg.formats.contains(&Format::Csv) {
            w.csv(&format!("{name}.csv"), &report_table(report))?;
        }
        if cfg.formats.contains(&Format::Json) {
            w.json(&format!("{name}.json"), report)?;
        }
    }

    let (_, heldout_pairs) = split_held_out(&full.prepared.pairs, &cfg.split)?;
    let held_keys: BTreeSet<(ConditionId, usize)> = heldout_pairs.iter().map(|p| (p.condition, p.pair_index)).collect();
    let mut pairs = Table::new(&["condition", "pair_index", "m1_pc1", "m1_pc2", "m2_pc1", "m2_pc2", "split"]);
    for p in full.prepared.all_pairs() {
        let split = if held_keys.contains(&(p.condition, p.pair_index)) { "held_out" } else { "train" };
        pairs.push(vec![
            p.condition.to_string(),
            p.pair_index.to_string(),
            f6(p.input_latent[0]),
            f6(p.input_latent[1]),
            f6(p.target_latent[0]),
            f6(p.target_latent[1]),
            split.into(),
        ]);
    }
    w.csv("pairs.csv", &pairs)?;
    w.csv("latent_points.csv", &points_table(&full.prepared.points))?;
    w.csv("predicted_points.csv", &points_table(&full.predictions))?;

    let mut history = Table::new(&["epoch", "loss"]);
    for (e, l) in full.loss_history.iter().enumerate() {
        history.push(vec![e.to_string(), l.to_string()]);
    }
    w.csv("loss_history.csv", &history)?;
    w.json(
        "model.json",
        &ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            seed: cfg.train.seed,
            epochs: cfg.train.epochs,
            lr: cfg.train.lr,
            params: &full.params,
        },
    )?;
    w.json(
        "summary.json",
        &TrainEvalSummary {
            analysis: cfg.analysis,
            conditions: &cfg.conditions,
            counts: count_rows(&ds, &cfg.conditions),
            n_pairs: full.report.n_train_pairs,
            dropped_columns: &loaded.dropped,
            full_final_loss: full.report.final_loss,
            full_hierarchy_flags: &full.report.hierarchy_flags,
            held_out_global_rmse: held.global_rmse,
            held_out_hierarchy_flags: &held.hierarchy_flags,
            leave_condition_out: folds
                .iter()
                .map(|f| {
                    let row = &f.rows[0];
                    FoldSummary {
                        withheld: row.condition,
                        d_obs: row.d_obs,
                        d_pred: row.d_pred,
                        e_centroid: row.e_centroid,
                        pointwise_rmse: row.pointwise_rmse,
                    }
                })
                .collect(),
        },
    )?;
    Ok(w.written)
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a SynthSpec,
    truth: &'a PlantedTruth,
}

pub fn read_synth_spec(path: Option<&Path>) -> anyhow::Result<SynthSpec> {
    let Some(path) = path else { return Ok(SynthSpec::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

/// Writes `synthetic.csv` and `planted_truth.json` into `out`.
pub fn synth(spec: &SynthSpec, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let (ds, truth) = generate_with_truth(spec).map_err(|e| match e {
        latentry_core::Error::InvalidConfig(m) => anyhow::Error::new(ConfigError(m)),
        other => other.into(),
    })?;
    let hash = sha256_hex(&serde_json::to_vec(spec).context("serializing spec")?);
    let prov = Provenance::for_synth(hash, spec.seed);
    let mut w = Writer::new(out, &prov)?;

    let mut header = vec!["condition", "session"];
    header.extend(ds.feature_names().iter().map(String::as_str));
    let mut t = Table::new(&header);
    for o in ds.observations() {
        let mut row = vec![o.condition.to_string(), o.session.to_string()];
        row.extend(o.features.iter().map(|x| x.to_string()));
        t.push(row);
    }
    w.csv("synthetic.csv", &t)?;
    w.json("planted_truth.json", &TruthFile { spec, truth: &truth })?;
    Ok(w.written)
}
