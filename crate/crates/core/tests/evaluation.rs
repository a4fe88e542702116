mod oracles;

use chromaclass::eval::{auc, k_fold_split, micro_average_roc, roc_curve};
use oracles::{pairwise_auc, rng};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn trapezoid_auc_equals_pairwise_on_random_lists() {
    let mut r = rng(1000);
    for case in 0..1000 {
        let n = r.random_range(2..60);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        // Coarse scores force plenty of ties.
        let levels = r.random_range(2..12);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let curve = roc_curve(&scores, &labels).unwrap();
        let got = auc(&curve);
        let want = pairwise_auc(&scores, &labels);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
    }
}

#[test]
fn perfect_and_reversed_rankings() {
    let labels = [true, true, false, false, false];
    let s = [0.9, 0.8, 0.3, 0.2, 0.1];
    assert_eq!(auc(&roc_curve(&s, &labels).unwrap()), 1.0);
    let rev: Vec<f64> = s.iter().map(|v| -v).collect();
    assert_eq!(auc(&roc_curve(&rev, &labels).unwrap()), 0.0);
    let s = [0.9, 0.8, 0.7, 0.6];
    assert_eq!(auc(&roc_curve(&s, &[true, false, true, false]).unwrap()), 0.75);
}

#[test]
fn random_multiclass_scores_give_chance_auc() {
    let mut r = rng(3);
    let (n, k) = (3000, 5);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let scores: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    let a = micro_average_roc(&scores, &labels).unwrap().auc();
    assert!((a - 0.5).abs() <= 0.05, "{a}");
}

#[test]
fn fold_plans_on_a_grid() {
    for &(n, k) in &[(2, 2), (10, 10), (17, 3), (100, 7), (450, 10), (451, 10), (270, 10)] {
        for classes in [1, 3, 15] {
            let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
            let plan = k_fold_split(&labels, k, 77, true).unwrap();
            check_plan(&plan.folds, n, k);
            assert_eq!(plan, k_fold_split(&labels, k, 77, true).unwrap());
        }
    }
    let labels = vec![0; 450];
    let plan = k_fold_split(&labels, 10, 1, false).unwrap();
    assert!(plan.folds.iter().all(|f| f.len() == 45));
}

fn check_plan(folds: &[Vec<usize>], n: usize, k: usize) {
    assert_eq!(folds.len(), k);
    let mut seen = vec![false; n];
    for f in folds {
        for &i in f {
            assert!(!seen[i], "index {i} in two folds");
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
}

proptest! {
    #[test]
    fn fold_plan_properties(n in 2usize..300, kfrac in 0.0f64..1.0, classes in 1usize..16, seed: u64, stratified: bool) {
        let k = 2 + ((n - 2) as f64 * kfrac) as usize;
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % classes).collect();
        let plan = k_fold_split(&labels, k, seed, stratified).unwrap();
        check_plan(&plan.folds, n, k);
    }

    #[test]
    fn roc_points_monotone_and_auc_dual(pairs in proptest::collection::vec((0u8..20, any::<bool>()), 2..80)) {
        let mut labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let curve = roc_curve(&scores, &labels).unwrap();
        prop_assert_eq!(curve.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(curve.points.last().copied(), Some((1.0, 1.0)));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((auc(&curve) - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }
}
