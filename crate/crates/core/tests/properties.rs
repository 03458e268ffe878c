//! Property tests for the structural invariants of the bound computations.

use std::sync::Arc;

use proptest::prelude::*;

use collusion_core::bounds::{
    idr_curve, planting_bound_fl, planting_bound_fo, BoundParams, IdrObjective,
    PopulationDistribution,
};
use collusion_core::strategies::{EscapeSelector, Transformation};
use collusion_core::tabular::{Dataset, Role, Universe};

fn small_universe(card1: usize) -> Arc<Universe> {
    let cats = |k: usize| (0..k).map(|i| format!("c{i}")).collect::<Vec<_>>();
    Arc::new(
        Universe::new(
            vec![("f0".into(), cats(2)), ("f1".into(), cats(card1))],
            vec!["y0".into(), "y1".into(), "y2".into()],
        )
        .unwrap(),
    )
}

fn build_dataset(u: &Arc<Universe>, raw: &[(u16, u16, u16)]) -> Dataset {
    let mut d = Dataset::new(u.clone(), Role::Collective);
    for &(a, b, y) in raw {
        d.push(&[a, b], y).unwrap();
    }
    d
}

prop_compose! {
    fn raw_samples()(v in prop::collection::vec((0..2u16, 0..3u16, 0..3u16), 5..60)) -> Vec<(u16, u16, u16)> {
        v
    }
}

prop_compose! {
    fn raw_params()(extra in 10..300u64, n_test in 5..200u64) -> (u64, u64) {
        (extra, n_test)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn feature_label_bound_dominates_feature_only(
        raw in raw_samples(),
        (extra, n_test) in raw_params(),
        y_star in 0..3u16,
        fix_cat in 0..2u16,
    ) {
        let u = small_universe(3);
        let d = build_dataset(&u, &raw);
        let g = Transformation::new(&u, &[(0, fix_cat)]).unwrap();
        let params = BoundParams {
            n_consumers: d.len() as u64 + extra,
            n_test,
            n_collective: d.len() as u64,
            n_estimation: None,
            delta: 0.05,
            epsilon: 0.0,
            eta: None,
        };
        let fl = planting_bound_fl(&d, &g, y_star, &params).unwrap();
        let fo = planting_bound_fo(&d, &g, y_star, &EscapeSelector::FlipFixed, &params).unwrap();
        prop_assert!(fl.bound >= fo.bound - 1e-15, "fl={} fo={}", fl.bound, fo.bound);
    }

    #[test]
    fn bound_nonincreasing_in_epsilon(
        raw in raw_samples(),
        (extra, n_test) in raw_params(),
    ) {
        let u = small_universe(3);
        let d = build_dataset(&u, &raw);
        let g = Transformation::new(&u, &[(0, 0)]).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.05, 0.2, 0.5, 0.9] {
            let params = BoundParams {
                n_consumers: d.len() as u64 + extra,
                n_test,
                n_collective: d.len() as u64,
                n_estimation: None,
                delta: 0.05,
                epsilon: eps,
                eta: None,
            };
            let b = planting_bound_fl(&d, &g, 1, &params).unwrap().bound;
            prop_assert!(b <= prev + 1e-15, "eps={eps}: {b} > {prev}");
            prev = b;
        }
    }

    #[test]
    fn larger_signal_set_never_tightens_the_bound(
        raw in raw_samples(),
        (extra, n_test) in raw_params(),
        y_star in 0..3u16,
    ) {
        // same data, same map; the second universe pads the free feature
        // with categories that never occur, inflating #X̃ and shrinking δ̃
        let u_small = small_universe(3);
        let u_big = small_universe(7);
        let d_small = build_dataset(&u_small, &raw);
        let d_big = build_dataset(&u_big, &raw);
        let g_small = Transformation::new(&u_small, &[(0, 0)]).unwrap();
        let g_big = Transformation::new(&u_big, &[(0, 0)]).unwrap();
        let params = BoundParams {
            n_consumers: d_small.len() as u64 + extra,
            n_test,
            n_collective: d_small.len() as u64,
            n_estimation: None,
            delta: 0.05,
            epsilon: 0.0,
            eta: None,
        };
        let tight = planting_bound_fl(&d_small, &g_small, y_star, &params).unwrap();
        let loose = planting_bound_fl(&d_big, &g_big, y_star, &params).unwrap();
        prop_assert!(loose.bound <= tight.bound + 1e-15);
        prop_assert!(loose.delta_tilde.unwrap() < tight.delta_tilde.unwrap());
    }

    #[test]
    fn idr_cracked_sets_nest_along_alpha(
        weights in prop::collection::vec(0.0..1.0f64, 12),
        y_star in 0..2u16,
    ) {
        // distribution over a 2x2 universe with 3 labels, possibly sparse
        let u = Arc::new(Universe::new(
            vec![
                ("f0".into(), vec!["a".into(), "b".into()]),
                ("f1".into(), vec!["a".into(), "b".into()]),
            ],
            vec!["y0".into(), "y1".into(), "y2".into()],
        ).unwrap());
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 1e-6);
        let mut cells = Vec::new();
        let mut i = 0;
        for a in 0..2u16 {
            for b in 0..2u16 {
                for y in 0..3u16 {
                    cells.push((vec![a, b], y, weights[i] / total));
                    i += 1;
                }
            }
        }
        let dist = PopulationDistribution::new(u.clone(), cells).unwrap();
        let g = Transformation::new(&u, &[(0, 0)]).unwrap();
        let alphas: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
        let reports = idr_curve(
            &dist, &g, IdrObjective::PlantFeatureLabel { y_star }, 0.0, &alphas,
        ).unwrap();
        let mut prev_bound = -1.0;
        let mut prev_cracked: Vec<Vec<u16>> = Vec::new();
        for r in &reports {
            prop_assert!(r.bound >= prev_bound - 1e-15, "bound must not decrease");
            let cracked: Vec<Vec<u16>> = r
                .per_feature
                .iter()
                .filter(|f| f.cracked)
                .map(|f| f.feature.clone())
                .collect();
            for c in &prev_cracked {
                prop_assert!(cracked.contains(c), "cracked sets must nest");
            }
            prev_bound = r.bound;
            prev_cracked = cracked;
        }
    }
}
