//! Slow, independent reference implementations used by the integration
//! and acceptance tests. Nothing here calls into the library's numerics.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Random binary problem: `m` points in `[0, 1]^dim`, both labels present.
pub fn random_binary(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        if ys.iter().any(|&y| y > 0.0) && ys.iter().any(|&y| y < 0.0) {
            return (xs, ys);
        }
    }
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for i in 0..n {
            if i != col {
                let f = aug[i][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[i][j] -= f * aug[col][j];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// The bordered LS-SVM system `[0 yᵀ; y Ω] [b; α] = [0; 1]`.
pub fn lssvm_system(xs: &[Vec<f64>], ys: &[f64], sigma: f64, gamma: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = xs.len();
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    for i in 0..m {
        a[0][i + 1] = ys[i];
        a[i + 1][0] = ys[i];
        for j in 0..m {
            a[i + 1][j + 1] = ys[i] * ys[j] * rbf(&xs[i], &xs[j], sigma) + if i == j { 1.0 / gamma } else { 0.0 };
        }
    }
    let mut rhs = vec![1.0; m + 1];
    rhs[0] = 0.0;
    (a, rhs)
}

/// `(b, α)` via the explicit inverse of the bordered system.
pub fn lssvm_dense(xs: &[Vec<f64>], ys: &[f64], sigma: f64, gamma: f64) -> (f64, Vec<f64>) {
    let (a, rhs) = lssvm_system(xs, ys, sigma, gamma);
    let inv = gauss_jordan_inverse(&a);
    let sol: Vec<f64> = inv
        .iter()
        .map(|row| row.iter().zip(&rhs).map(|(p, q)| p * q).sum())
        .collect();
    (sol[0], sol[1..].to_vec())
}

/// `‖A·[b; α] − rhs‖₂ / ‖rhs‖₂`.
pub fn lssvm_relative_residual(xs: &[Vec<f64>], ys: &[f64], sigma: f64, gamma: f64, b: f64, alpha: &[f64]) -> f64 {
    let (a, rhs) = lssvm_system(xs, ys, sigma, gamma);
    let mut x = vec![b];
    x.extend_from_slice(alpha);
    let r2: f64 = a
        .iter()
        .zip(&rhs)
        .map(|(row, r)| {
            let ax: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            (ax - r).powi(2)
        })
        .sum();
    let n2: f64 = rhs.iter().map(|v| v * v).sum();
    (r2 / n2).sqrt()
}

/// Soft-margin dual objective `Σα − ½ Σ αᵢαⱼyᵢyⱼκᵢⱼ`.
pub fn svm_dual_objective(xs: &[Vec<f64>], ys: &[f64], sigma: f64, alpha: &[f64]) -> f64 {
    let m = xs.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += alpha[i] * alpha[j] * ys[i] * ys[j] * rbf(&xs[i], &xs[j], sigma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ c, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(z: &[f64], ys: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        z.iter()
            .zip(ys)
            .map(|(zi, yi)| (zi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lambda: f64| -> f64 { at(lambda).iter().zip(ys).map(|(a, y)| a * y).sum() };
    // g is non-increasing in lambda.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes the soft-margin dual by accelerated projected gradient ascent.
pub fn svm_dual_max(xs: &[Vec<f64>], ys: &[f64], sigma: f64, c: f64, iterations: usize) -> Vec<f64> {
    let m = xs.len();
    let q: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| ys[i] * ys[j] * rbf(&xs[i], &xs[j], sigma)).collect())
        .collect();
    // Gershgorin bound on the largest eigenvalue of Q.
    let lipschitz = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; m];
    let mut prev = alpha.clone();
    let mut t = 1.0_f64;
    for _ in 0..iterations {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / t_next;
        let yv: Vec<f64> = alpha.iter().zip(&prev).map(|(a, p)| a + mom * (a - p)).collect();
        let grad: Vec<f64> = (0..m)
            .map(|i| 1.0 - q[i].iter().zip(&yv).map(|(qij, v)| qij * v).sum::<f64>())
            .collect();
        let z: Vec<f64> = yv.iter().zip(&grad).map(|(v, g)| v + step * g).collect();
        prev = alpha;
        alpha = project(&z, ys, c);
        t = t_next;
    }
    alpha
}

/// Trapezoid-free AUC: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` over all pairs.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
