//! 8 -> 16 -> 16 -> 2 ReLU network trained full-batch with Adam on MSE.
//!
//! One network stands for the combined longitudinal and constraint
//! effects; no attempt is made to separate them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, SessionId};
use crate::pairing::{assemble_input, model_input, TrainingPair, INPUT_WIDTH};
use crate::preprocess::LatentPoint;
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const HIDDEN1: usize = 16;
pub const HIDDEN2: usize = 16;
pub const OUTPUT: usize = 2;

/// Weights are stored `[out][in]`, so `w1[i]` is the input row of hidden unit `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub w1: [[f64; INPUT_WIDTH]; HIDDEN1],
    pub b1: [f64; HIDDEN1],
    pub w2: [[f64; HIDDEN1]; HIDDEN2],
    pub b2: [f64; HIDDEN2],
    pub w3: [[f64; HIDDEN2]; OUTPUT],
    pub b3: [f64; OUTPUT],
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    pub const N_PARAMS: usize =
        HIDDEN1 * INPUT_WIDTH + HIDDEN1 + HIDDEN2 * HIDDEN1 + HIDDEN2 + OUTPUT * HIDDEN2 + OUTPUT;

    pub fn zeros() -> Self {
        Self {
            w1: [[0.0; INPUT_WIDTH]; HIDDEN1],
            b1: [0.0; HIDDEN1],
            w2: [[0.0; HIDDEN1]; HIDDEN2],
            b2: [0.0; HIDDEN2],
            w3: [[0.0; HIDDEN2]; OUTPUT],
            b3: [0.0; OUTPUT],
        }
    }

    /// Parameter blocks in fixed order: w1, b1, w2, b2, w3, b3.
    pub fn blocks(&self) -> [&[f64]; 6] {
        [
            self.w1.as_flattened(),
            &self.b1,
            self.w2.as_flattened(),
            &self.b2,
            self.w3.as_flattened(),
            &self.b3,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_flattened_mut(),
            &mut self.b1,
            self.w2.as_flattened_mut(),
            &mut self.b2,
            self.w3.as_flattened_mut(),
            &mut self.b3,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().into_iter().flat_map(|b| b.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// Uniform fan-based initialization from SplitMix64; biases are zero.
///
/// Draw order is w1, w2, w3, each row-major.
pub fn init_params(seed: u64) -> ModelParams {
    let mut rng = SplitMix64::new(seed);
    let mut p = ModelParams::zeros();
    let bound = |fan_in: usize, fan_out: usize| libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let fill = |w: &mut [f64], a: f64, rng: &mut SplitMix64| w.iter_mut().for_each(|x| *x = rng.uniform(-a, a));
    fill(p.w1.as_flattened_mut(), bound(INPUT_WIDTH, HIDDEN1), &mut rng);
    fill(p.w2.as_flattened_mut(), bound(HIDDEN1, HIDDEN2), &mut rng);
    fill(p.w3.as_flattened_mut(), bound(HIDDEN2, OUTPUT), &mut rng);
    p
}

struct Trace {
    z1: [f64; HIDDEN1],
    a1: [f64; HIDDEN1],
    z2: [f64; HIDDEN2],
    a2: [f64; HIDDEN2],
    out: [f64; OUTPUT],
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 { x } else { 0.0 }
}

fn forward_trace(p: &ModelParams, x: &[f64; INPUT_WIDTH]) -> Trace {
    let mut z1 = p.b1;
    for (z, row) in z1.iter_mut().zip(&p.w1) {
        *z += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
    let a1 = z1.map(relu);
    let mut z2 = p.b2;
    for (z, row) in z2.iter_mut().zip(&p.w2) {
        *z += row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>();
    }
    let a2 = z2.map(relu);
    let mut out = p.b3;
    for (o, row) in out.iter_mut().zip(&p.w3) {
        *o += row.iter().zip(&a2).map(|(w, v)| w * v).sum::<f64>();
    }
    Trace { z1, a1, z2, a2, out }
}

pub fn forward(p: &ModelParams, x: &[f64; INPUT_WIDTH]) -> [f64; OUTPUT] {
    forward_trace(p, x).out
}

fn squared_error(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

/// Mean over pairs of the squared Euclidean prediction error.
pub fn loss(p: &ModelParams, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = pairs.iter().map(|pair| squared_error(forward(p, &assemble_input(pair)), pair.target_latent)).sum();
    Ok(total / pairs.len() as f64)
}

/// Loss and its exact gradient in one pass. ReLU'(0) is taken as 0.
pub fn loss_and_gradient(p: &ModelParams, pairs: &[TrainingPair]) -> Result<(f64, Gradients)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = 2.0 / pairs.len() as f64;
    let mut g = ModelParams::zeros();
    let mut total = 0.0;
    for pair in pairs {
        let x = assemble_input(pair);
        let t = forward_trace(p, &x);
        total += squared_error(t.out, pair.target_latent);

        let dout = [scale * (t.out[0] - pair.target_latent[0]), scale * (t.out[1] - pair.target_latent[1])];
        let mut dz2 = [0.0; HIDDEN2];
        for o in 0..OUTPUT {
            g.b3[o] += dout[o];
            for j in 0..HIDDEN2 {
                g.w3[o][j] += dout[o] * t.a2[j];
                dz2[j] += p.w3[o][j] * dout[o];
            }
        }
        for j in 0..HIDDEN2 {
            if t.z2[j] <= 0.0 {
                dz2[j] = 0.0;
            }
        }
        let mut dz1 = [0.0; HIDDEN1];
        for j in 0..HIDDEN2 {
            if dz2[j] == 0.0 {
                continue;
            }
            g.b2[j] += dz2[j];
            for i in 0..HIDDEN1 {
                g.w2[j][i] += dz2[j] * t.a1[i];
                dz1[i] += p.w2[j][i] * dz2[j];
            }
        }
        for i in 0..HIDDEN1 {
            if t.z1[i] <= 0.0 || dz1[i] == 0.0 {
                continue;
            }
            g.b1[i] += dz1[i];
            for k in 0..INPUT_WIDTH {
                g.w1[i][k] += dz1[i] * x[k];
            }
        }
    }
    Ok((total / pairs.len() as f64, g))
}

pub fn backward(p: &ModelParams, pairs: &[TrainingPair]) -> Result<Gradients> {
    loss_and_gradient(p, pairs).map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self::with_lr(0.001)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub m: ModelParams,
    pub v: ModelParams,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(hyper: AdamHyper) -> Self {
        Self { step_count: 0, m: ModelParams::zeros(), v: ModelParams::zeros(), hyper }
    }
}

/// One bias-corrected Adam update of a flat parameter block at step `t` (1-based).
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, h: &AdamHyper) {
    let c1 = 1.0 - libm::pow(h.beta1, t as f64);
    let c2 = 1.0 - libm::pow(h.beta2, t as f64);
    for (((p, g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = h.beta1 * *m + (1.0 - h.beta1) * g;
        *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= h.lr * m_hat / (libm::sqrt(v_hat) + h.eps);
    }
}

pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) {
    state.step_count += 1;
    let t = state.step_count;
    let hyper = state.hyper;
    let AdamState { m, v, .. } = state;
    for (((p, g), m), v) in params.blocks_mut().into_iter().zip(grads.blocks()).zip(m.blocks_mut()).zip(v.blocks_mut()) {
        adam_update(p, g, m, v, t, &hyper);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 800, seed: 42, lr: 0.001 }
    }
}

/// Sorts pairs by (condition, pair index, values) so the floating-point
/// summation order in a full-batch pass does not depend on input order.
fn canonical_order(pairs: &[TrainingPair]) -> Vec<TrainingPair> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        a.condition
            .cmp(&b.condition)
            .then(a.pair_index.cmp(&b.pair_index))
            .then_with(|| {
                let ka = [a.input_latent[0], a.input_latent[1], a.target_latent[0], a.target_latent[1]];
                let kb = [b.input_latent[0], b.input_latent[1], b.target_latent[0], b.target_latent[1]];
                ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
            })
    });
    sorted
}

/// Full-batch training from `init_params(cfg.seed)`.
///
/// `loss_history[e]` is the loss evaluated before the update of epoch `e`.
pub fn train(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<(ModelParams, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let batch = canonical_order(pairs);
    let mut params = init_params(cfg.seed);
    let mut state = AdamState::new(AdamHyper::with_lr(cfg.lr));
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (l, g) = loss_and_gradient(&params, &batch)?;
        if !l.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        history.push(l);
        adam_step(&mut params, &g, &mut state);
    }
    if !params.is_finite() {
        return Err(Error::DivergedLoss { epoch: cfg.epochs });
    }
    Ok((params, history))
}

/// Predicted second-session points for first-session points of `condition`.
pub fn predict_m2(p: &ModelParams, points: &[LatentPoint], condition: ConditionId) -> Result<Vec<LatentPoint>> {
    points
        .iter()
        .map(|pt| {
            if pt.session != SessionId::M1 {
                return Err(Error::SessionMismatch { expected: SessionId::M1, found: pt.session });
            }
            if pt.condition != condition {
                return Err(Error::ConditionMismatch { expected: condition, found: pt.condition });
            }
            let [pc1, pc2] = forward(p, &model_input(pt.coords(), condition));
            Ok(LatentPoint { pc1, pc2, condition, session: SessionId::M2 })
        })
        .collect()
}

/// Predictions for the inputs of `pairs`, in the same order.
pub fn predict_pairs(p: &ModelParams, pairs: &[TrainingPair]) -> Vec<[f64; 2]> {
    pairs.iter().map(|pair| forward(p, &assemble_input(pair))).collect()
}
