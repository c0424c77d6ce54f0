use latentry_core::metrics::{centroid, hierarchy_satisfied, observed_displacement, rank, within_session_distances};
use latentry_core::preprocess::{fit_projection, fit_standardization, standardize};
use latentry_core::rng::SplitMix64;
use latentry_core::{ConditionId, Dataset, LatentPoint, Observation, SessionId};
use proptest::prelude::*;

fn dataset_from(rows: &[Vec<f64>]) -> Dataset {
    let f = rows[0].len();
    let obs = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Observation { condition: ConditionId::ALL[i % 6], session: SessionId::ALL[(i / 6) % 2], features: r.clone() })
        .collect();
    Dataset::new(obs, (0..f).map(|j| format!("c{j}")).collect()).unwrap()
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..9, 12usize..40).prop_flat_map(|(f, n)| prop::collection::vec(prop::collection::vec(-1e3f64..1e3, f), n))
}

fn cloud() -> impl Strategy<Value = Vec<LatentPoint>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 24..48).prop_map(|xs| {
        xs.into_iter()
            .enumerate()
            .map(|(i, (pc1, pc2))| LatentPoint {
                pc1,
                pc2,
                condition: ConditionId::ALL[i % 6],
                session: SessionId::ALL[(i / 6) % 2],
            })
            .collect()
    })
}

fn all_centroids(points: &[LatentPoint]) -> Vec<latentry_core::Centroid> {
    ConditionId::ALL
        .iter()
        .flat_map(|&c| SessionId::ALL.map(|s| centroid(points, c, s).unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn standardized_columns_have_zero_mean_unit_std(rows in matrix()) {
        let ds = dataset_from(&rows);
        let sp = fit_standardization(&ds);
        let z = standardize(&ds, &sp).unwrap();
        let n = z.len() as f64;
        for j in 0..z.n_features() {
            if sp.constant_columns.contains(&j) {
                continue;
            }
            let col: Vec<f64> = z.observations().iter().map(|o| o.features[j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let std = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((std - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn axes_are_orthonormal(rows in matrix()) {
        let p = fit_projection(&dataset_from(&rows)).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        prop_assert!((dot(&p.axes[0], &p.axes[0]) - 1.0).abs() < 1e-10);
        prop_assert!((dot(&p.axes[1], &p.axes[1]) - 1.0).abs() < 1e-10);
        prop_assert!(dot(&p.axes[0], &p.axes[1]).abs() < 1e-10);
        prop_assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn projected_distances_never_exceed_standardized_distances(rows in matrix()) {
        let ds = dataset_from(&rows);
        let p = fit_projection(&ds).unwrap();
        let z = standardize(&ds, &p.standardization).unwrap();
        let (a, b) = (&z.observations()[0], &z.observations()[1]);
        let full = a.features.iter().zip(&b.features).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let pa = p.project(&ds.observations()[0]).unwrap().coords();
        let pb = p.project(&ds.observations()[1]).unwrap().coords();
        prop_assert!((pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= full + 1e-9);
    }

    #[test]
    fn distances_survive_rotation_and_translation(points in cloud(), angle in 0.0f64..6.3, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
        let (s, c) = angle.sin_cos();
        let moved: Vec<LatentPoint> = points
            .iter()
            .map(|p| LatentPoint { pc1: c * p.pc1 - s * p.pc2 + tx, pc2: s * p.pc1 + c * p.pc2 + ty, ..*p })
            .collect();
        let (a, b) = (all_centroids(&points), all_centroids(&moved));
        for k in 0..6 {
            let d0 = observed_displacement(&a[2 * k], &a[2 * k + 1]).unwrap();
            let d1 = observed_displacement(&b[2 * k], &b[2 * k + 1]).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-9);
        }
        for session in SessionId::ALL {
            let w0 = within_session_distances(&a, session).unwrap();
            let w1 = within_session_distances(&b, session).unwrap();
            for (x, y) in w0.iter().zip(&w1) {
                prop_assert!((x.1 - y.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_ignores_input_order(values in prop::collection::vec(0.0f64..10.0, 6), seed in any::<u64>(), tol in 0.0f64..0.5) {
        let input: Vec<(ConditionId, f64)> = ConditionId::ALL.into_iter().zip(values).collect();
        let mut shuffled = input.clone();
        let mut rng = SplitMix64::new(seed);
        for i in (1..shuffled.len()).rev() {
            let j = rng.below(i + 1);
            shuffled.swap(i, j);
        }
        let r = rank(&input, tol);
        prop_assert_eq!(&r, &rank(&shuffled, tol));
        prop_assert!(r.ordered.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn separated_increasing_values_satisfy_hierarchy(base in 0.0f64..5.0, gaps in prop::collection::vec(0.06f64..2.0, 2)) {
        let values = [(ConditionId::Oc3, base), (ConditionId::Onl, base + gaps[0]), (ConditionId::Oc25, base + gaps[0] + gaps[1])];
        let expected = [ConditionId::Oc3, ConditionId::Onl, ConditionId::Oc25];
        prop_assert!(hierarchy_satisfied(&rank(&values, 0.05), &expected).unwrap());
        let swapped = [values[1].0, values[0].0, values[2].0];
        prop_assert!(!hierarchy_satisfied(&rank(&values, 0.05), &swapped).unwrap());
    }
}

#[test]
fn first_axis_maximizes_projected_variance() {
    let mut rng = SplitMix64::new(11);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let a = rng.normal();
            let b = rng.normal();
            vec![a, 0.5 * a + 0.2 * b, -a + rng.normal() * 0.3, b, rng.normal()]
        })
        .collect();
    let ds = dataset_from(&rows);
    let p = fit_projection(&ds).unwrap();
    let z = standardize(&ds, &p.standardization).unwrap();
    let n = z.len() as f64;
    let variance_along = |d: &[f64]| {
        let proj: Vec<f64> = z.observations().iter().map(|o| o.features.iter().zip(d).map(|(x, y)| x * y).sum()).collect();
        let m = proj.iter().sum::<f64>() / n;
        proj.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
    };
    assert!((variance_along(&p.axes[0]) - p.explained_variance[0]).abs() < 1e-10);
    for _ in 0..10_000 {
        let mut d: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= norm);
        assert!(variance_along(&d) <= p.explained_variance[0] + 1e-10);
    }
}
