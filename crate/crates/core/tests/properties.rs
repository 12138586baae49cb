use proptest::prelude::*;

use fuzzfuse::baselines::{combine_scores, EnsembleRule, EnsembleRuleConfig};
use fuzzfuse::divergence::{jsd, kld, DEFAULT_SMOOTHING};
use fuzzfuse::io::{default_class_names, load_scores, write_scores, DecisionScoreMatrix, LoadOptions};
use fuzzfuse::measures::{cumulative_measure, lambda_residual, solve_lambda};
use fuzzfuse::stats::{chi_square_1df_sf, mcnemar_from_counts};
use fuzzfuse::{fuse_sample, ClampPolicy, FuzzyDensitySet, IntegralKind};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn densities(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, n)
}

/// (densities, per-classifier score rows) with N classifiers and P classes.
fn fusion_case() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=5, 2usize..=6).prop_flat_map(|(n, p)| (densities(n), prop::collection::vec(distribution(p), n)))
}

fn matrices(n: usize, samples: usize, p: usize) -> impl Strategy<Value = Vec<DecisionScoreMatrix>> {
    prop::collection::vec(prop::collection::vec(distribution(p), samples), n).prop_map(move |all| {
        all.into_iter()
            .enumerate()
            .map(|(k, scores)| DecisionScoreMatrix {
                classifier_name: format!("m{k}"),
                sample_ids: (0..samples).map(|i| format!("s{i}")).collect(),
                labels: vec![None; samples],
                scores,
                class_names: default_class_names(p),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn lambda_solves_its_equation(g in (2usize..=8).prop_flat_map(densities)) {
        let l = solve_lambda(&g).unwrap();
        prop_assert!(l > -1.0);
        prop_assert!(lambda_residual(&g, l).abs() <= 1e-9);
        prop_assert!((cumulative_measure(&g, l).last() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn lambda_ignores_order(mut g in (2usize..=8).prop_flat_map(densities), k in 0usize..8) {
        let a = solve_lambda(&g).unwrap();
        let len = g.len();
        g.rotate_left(k % len);
        prop_assert_eq!(a, solve_lambda(&g).unwrap());
    }

    #[test]
    fn chain_is_nondecreasing(g in (1usize..=8).prop_flat_map(densities)) {
        let l = solve_lambda(&g).unwrap();
        let chain = cumulative_measure(&g, l);
        prop_assert!(chain.values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn fused_scores_stay_within_inputs((g, rows) in fusion_case()) {
        let d = FuzzyDensitySet::new(&g, ClampPolicy::Reject).unwrap();
        for kind in [IntegralKind::Sugeno, IntegralKind::Choquet, IntegralKind::Alg1] {
            let f = fuse_sample(&rows, &d, kind).unwrap();
            for (c, y) in f.fused_scores.iter().enumerate() {
                let lo = rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*y >= lo - 1e-9 && *y <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn choquet_forms_agree((g, rows) in fusion_case()) {
        let d = FuzzyDensitySet::new(&g, ClampPolicy::Reject).unwrap();
        let a = fuse_sample(&rows, &d, IntegralKind::Alg1).unwrap();
        let b = fuse_sample(&rows, &d, IntegralKind::Choquet).unwrap();
        for (x, y) in a.fused_scores.iter().zip(&b.fused_scores) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn divergences_are_bounded_and_jsd_symmetric((p, q) in (2usize..=10).prop_flat_map(|n| (distribution(n), distribution(n)))) {
        prop_assert!(kld(&p, &q, DEFAULT_SMOOTHING).unwrap() >= 0.0);
        let a = jsd(&p, &q).unwrap();
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&a));
        prop_assert!((a - jsd(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!(kld(&p, &p, DEFAULT_SMOOTHING).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn equal_weights_match_average(ms in (1usize..=4, 1usize..=5, 2usize..=5).prop_flat_map(|(n, s, p)| matrices(n, s, p))) {
        let avg = combine_scores(&ms, &EnsembleRuleConfig::new(EnsembleRule::Average).unwrap()).unwrap();
        let w = combine_scores(&ms, &EnsembleRuleConfig::weighted(vec![1.0; ms.len()]).unwrap()).unwrap();
        for (a, b) in avg.samples.iter().zip(&w.samples) {
            for (x, y) in a.fused_scores.iter().zip(&b.fused_scores) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn symmetric_rules_ignore_classifier_order(ms in (2usize..=4, 1usize..=5, 2usize..=5).prop_flat_map(|(n, s, p)| matrices(n, s, p))) {
        let mut rev = ms.clone();
        rev.reverse();
        for rule in [EnsembleRule::Majority, EnsembleRule::Average, EnsembleRule::Product, EnsembleRule::Maximum] {
            let cfg = EnsembleRuleConfig::new(rule).unwrap();
            let a = combine_scores(&ms, &cfg).unwrap();
            let b = combine_scores(&rev, &cfg).unwrap();
            prop_assert_eq!(a.predicted(), b.predicted());
        }
    }

    #[test]
    fn score_files_round_trip(ms in (1usize..=1, 1usize..=20, 2usize..=6).prop_flat_map(|(n, s, p)| matrices(n, s, p))) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m0.csv");
        write_scores(&ms[0], &path).unwrap();
        let back = load_scores(&path, LoadOptions { renormalize: true }).unwrap();
        prop_assert_eq!(&back.sample_ids, &ms[0].sample_ids);
        for (a, b) in back.scores.iter().zip(&ms[0].scores) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-5);
            }
        }
        write_scores(&back, dir.path().join("again.csv")).unwrap();
        let again = load_scores(dir.path().join("again.csv"), LoadOptions { renormalize: true }).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.csv")).unwrap());
        prop_assert_eq!(again.scores.len(), back.scores.len());
    }

    #[test]
    fn mcnemar_p_shrinks_with_imbalance(n in 1u64..200, shift in 0u64..50) {
        let b = n / 2;
        let c = n - b;
        let balanced = mcnemar_from_counts(b, c).p_value;
        let skewed = mcnemar_from_counts(b + shift, c.saturating_sub(shift)).p_value;
        if mcnemar_from_counts(b, c).method == mcnemar_from_counts(b + shift, c.saturating_sub(shift)).method {
            prop_assert!(skewed <= balanced + 1e-12);
        }
    }

    #[test]
    fn chi_square_tail_matches_reference(x in 0.001f64..60.0) {
        let reference = 1.0 - ChiSquared::new(1.0).unwrap().cdf(x);
        let ours = chi_square_1df_sf(x);
        prop_assert!((ours - reference).abs() <= 1e-10 * reference.max(1e-6), "{} vs {}", ours, reference);
    }
}
