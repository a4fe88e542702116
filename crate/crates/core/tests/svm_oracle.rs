mod oracles;

use chromaclass::kernel::KernelSpec;
use chromaclass::svm::{train_svm, train_svm_with, SmoConfig};
use oracles::{random_binary, rng, svm_dual_max, svm_dual_objective};
use rand::Rng;

#[test]
fn complementary_slackness_on_random_sets() {
    let mut r = rng(31);
    for case in 0..40 {
        let m = r.random_range(2..=60);
        let (xs, ys) = random_binary(&mut r, m, 12);
        let c = 10f64.powf(r.random_range(-1.0..2.0));
        let model = train_svm(&xs, &ys, KernelSpec::rbf(0.7).unwrap(), c).unwrap();
        let balance: f64 = model.alphas().iter().zip(&ys).map(|(a, y)| a * y).sum();
        assert!(balance.abs() <= 1e-6, "case {case}: Σαy = {balance}");
        for (i, x) in xs.iter().enumerate() {
            let a = model.alphas()[i];
            assert!((0.0..=c).contains(&a));
            let yf = ys[i] * model.decision_value(x).unwrap();
            if a <= 1e-12 {
                assert!(yf >= 1.0 - 1e-3, "case {case}: α=0 but yf = {yf}");
            } else if a >= c - 1e-12 {
                assert!(yf <= 1.0 + 1e-3, "case {case}: α=C but yf = {yf}");
            } else {
                assert!((yf - 1.0).abs() <= 1e-3, "case {case}: free α but yf = {yf}");
            }
        }
    }
}

#[test]
fn two_point_closed_form() {
    let xs = vec![vec![1.0], vec![-1.0]];
    let model = train_svm(&xs, &[1.0, -1.0], KernelSpec::rbf(1.0).unwrap(), 10.0).unwrap();
    let expected = 1.0 / (1.0 - (-2.0f64).exp());
    assert!(model.bias().abs() <= 1e-6);
    for a in model.alphas() {
        assert!((a - expected).abs() <= 1e-6);
    }
    assert!((model.decision_value(&[1.0]).unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(model.predict(&[0.0]).unwrap(), 1.0);
}

#[test]
fn dual_objective_matches_projected_ascent() {
    let mut r = rng(5);
    for case in 0..10 {
        let (xs, ys) = random_binary(&mut r, 12, 3);
        let (sigma, c) = (0.5, 2.0);
        let model = train_svm(&xs, &ys, KernelSpec::rbf(sigma).unwrap(), c).unwrap();
        let oracle = svm_dual_max(&xs, &ys, sigma, c, 20_000);
        let want = svm_dual_objective(&xs, &ys, sigma, &oracle);
        let got = svm_dual_objective(&xs, &ys, sigma, model.alphas());
        assert!((got - want).abs() <= 1e-4, "case {case}: smo {got} vs oracle {want}");
        assert!((model.dual_objective() - got).abs() <= 1e-9);
    }
}

#[test]
fn objective_never_decreases() {
    let mut r = rng(17);
    let (xs, ys) = random_binary(&mut r, 50, 12);
    let cfg = SmoConfig {
        record_objective: true,
        ..SmoConfig::default()
    };
    let (_, stats) = train_svm_with(&xs, &ys, KernelSpec::rbf(0.6).unwrap(), 5.0, &cfg).unwrap();
    assert!(stats.objective_history.len() >= 2);
    for w in stats.objective_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "{} then {}", w[0], w[1]);
    }
    assert!(stats.kkt_gap <= 1e-3);
}
