// Central finite differences against the analytic backward pass.

use latentry_core::mlp::{adam_update, init_params, loss, loss_and_gradient, AdamHyper, ModelParams};
use latentry_core::pairing::{encode_condition, TrainingPair, TransitionFlag};
use latentry_core::rng::SplitMix64;
use latentry_core::ConditionId;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;
const ABS_FLOOR: f64 = 1e-8;

fn random_config(seed: u64) -> (ModelParams, Vec<TrainingPair>) {
    let mut rng = SplitMix64::new(seed ^ 0x9e37);
    let mut params = init_params(seed);
    // Non-zero biases so every block gets exercised.
    for b in [&mut params.b1[..], &mut params.b2[..], &mut params.b3[..]] {
        b.iter_mut().for_each(|x| *x = rng.uniform(-0.3, 0.3));
    }
    let n = 3 + rng.below(6);
    let pairs = (0..n)
        .map(|i| {
            let condition = ConditionId::ALL[rng.below(6)];
            TrainingPair {
                input_latent: [rng.normal(), rng.normal()],
                descriptor: encode_condition(condition),
                transition: TransitionFlag::default(),
                target_latent: [rng.normal(), rng.normal()],
                condition,
                pair_index: i,
            }
        })
        .collect();
    (params, pairs)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (params, pairs) = random_config(seed);
        let (_, grad) = loss_and_gradient(&params, &pairs).unwrap();
        let analytic: Vec<f64> = grad.iter().collect();
        let mut idx = 0;
        for block in 0..6 {
            let len = params.blocks()[block].len();
            for k in 0..len {
                let mut plus = params.clone();
                plus.blocks_mut()[block][k] += H;
                let mut minus = params.clone();
                minus.blocks_mut()[block][k] -= H;
                let numeric = (loss(&plus, &pairs).unwrap() - loss(&minus, &pairs).unwrap()) / (2.0 * H);
                let a = analytic[idx];
                let diff = (a - numeric).abs();
                let rel = diff / a.abs().max(numeric.abs()).max(ABS_FLOOR);
                worst = worst.max(rel);
                assert!(rel < REL_TOL, "seed {seed} block {block} index {k}: {a} vs {numeric}");
                idx += 1;
            }
        }
        assert_eq!(idx, ModelParams::N_PARAMS);
    }
    eprintln!("worst relative gradient error {worst:e}");
}

#[test]
fn first_adam_step_closed_form() {
    let mut theta = [0.5];
    let (mut m, mut v) = ([0.0], [0.0]);
    adam_update(&mut theta, &[1.0], &mut m, &mut v, 1, &AdamHyper::with_lr(0.001));
    assert!((theta[0] - 0.5 - (-0.001 / (1.0 + 1e-8))).abs() < 1e-12);
}

#[test]
fn first_adam_step_sign_is_scale_invariant() {
    let grad = [3.0, -0.2, 0.0, 1e-3];
    let step = |scale: f64| {
        let mut theta = [0.0; 4];
        let g: Vec<f64> = grad.iter().map(|x| x * scale).collect();
        adam_update(&mut theta, &g, &mut [0.0; 4], &mut [0.0; 4], 1, &AdamHyper::default());
        theta.map(f64::signum)
    };
    assert_eq!(step(1.0), step(250.0));
}
