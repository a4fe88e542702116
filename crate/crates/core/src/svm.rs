//! Soft-margin SVM baseline trained by SMO.
//!
//! Solves the dual `max Σαᵢ − ½ΣΣ αᵢαⱼyᵢyⱼκ(xᵢ,xⱼ)` subject to
//! `0 ≤ αᵢ ≤ C`, `Σαᵢyᵢ = 0`, updating the maximal violating pair at each
//! step until the KKT gap drops below the tolerance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::lssvm::{check_binary_problem, check_dim, sign};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    pub tolerance: f64,
    /// Iteration cap; `None` uses `max(1_000_000, 100·M)`.
    pub max_iterations: Option<usize>,
    /// Record the dual objective after every update.
    pub record_objective: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoStats {
    pub iterations: usize,
    /// Final `max_{I_up} −yG − min_{I_low} −yG`.
    pub kkt_gap: f64,
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub(crate) alphas: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) inputs: Vec<Vec<f64>>,
    pub(crate) labels: Vec<f64>,
    pub(crate) kernel: KernelSpec,
    pub(crate) c: f64,
}

pub fn train_svm(inputs: &[Vec<f64>], labels: &[f64], kernel: KernelSpec, c: f64) -> Result<BinarySvmModel> {
    train_svm_with(inputs, labels, kernel, c, &SmoConfig::default()).map(|(m, _)| m)
}

pub fn train_svm_with(
    inputs: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    c: f64,
    config: &SmoConfig,
) -> Result<(BinarySvmModel, SmoStats)> {
    check_binary_problem(inputs, labels)?;
    kernel.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be > 0, got {c}")));
    }
    let m = inputs.len();
    let k = kernel_matrix(&kernel, inputs);
    let y = labels;
    let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * k[(i, j)]);
    let max_iter = config.max_iterations.unwrap_or_else(|| (100 * m).max(1_000_000));

    let mut alpha = vec![0.0; m];
    // Gradient of ½αᵀQα − Σα.
    let mut grad = vec![-1.0; m];
    let mut stats = SmoStats::default();
    if config.record_objective {
        stats.objective_history.push(dual_objective(&alpha, &grad));
    }

    loop {
        let (i, j, gap) = select_pair(&alpha, &grad, y, c);
        stats.kkt_gap = gap;
        if gap < config.tolerance {
            break;
        }
        if stats.iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations: stats.iterations,
                violation: gap,
            });
        }
        let (i, j) = (i.expect("violating pair"), j.expect("violating pair"));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        update_pair(&mut alpha, &grad, &q, y, c, i, j);
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += q[(t, i)] * di + q[(t, j)] * dj;
        }
        stats.iterations += 1;
        if config.record_objective {
            stats.objective_history.push(dual_objective(&alpha, &grad));
        }
    }

    let bias = -compute_rho(&alpha, &grad, y, c);
    Ok((
        BinarySvmModel {
            alphas: alpha,
            bias,
            inputs: inputs.to_vec(),
            labels: labels.to_vec(),
            kernel,
            c,
        },
        stats,
    ))
}

/// `Σα − ½αᵀQα` from the maintained gradient.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (Option<usize>, Option<usize>, f64) {
    let mut best_up = (None, f64::NEG_INFINITY);
    let mut best_low = (None, f64::INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > best_up.1 {
            best_up = (Some(t), v);
        }
        if in_low(alpha[t], y[t], c) && v < best_low.1 {
            best_low = (Some(t), v);
        }
    }
    let gap = if best_up.0.is_some() && best_low.0.is_some() {
        best_up.1 - best_low.1
    } else {
        0.0
    };
    (best_up.0, best_low.0, gap)
}

/// Analytic two-variable step with clipping to the box.
fn update_pair(alpha: &mut [f64], grad: &[f64], q: &DMatrix<f64>, y: &[f64], c: f64, i: usize, j: usize) {
    if y[i] != y[j] {
        let mut quad = q[(i, i)] + q[(j, j)] + 2.0 * q[(i, j)];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            }
        } else {
            if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        }
    } else {
        let mut quad = q[(i, i)] + q[(j, j)] - 2.0 * q[(i, j)];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > c {
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            }
            if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            }
        } else {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
    }
}

/// Offset ρ (decision = Σαyκ − ρ): mean of `yG` over free vectors, or the
/// midpoint of the feasible interval when none are free.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    }
}

impl BinarySvmModel {
    pub fn from_parts(
        alphas: Vec<f64>,
        bias: f64,
        inputs: Vec<Vec<f64>>,
        labels: Vec<f64>,
        kernel: KernelSpec,
        c: f64,
    ) -> Result<Self> {
        if alphas.len() != inputs.len() || alphas.len() != labels.len() {
            return Err(Error::InvalidParameter(
                "alphas, inputs and labels must have equal length".into(),
            ));
        }
        kernel.validate()?;
        Ok(BinarySvmModel {
            alphas,
            bias,
            inputs,
            labels,
            kernel,
            c,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Dual objective `Σα − ½αᵀQα` at the stored multipliers.
    pub fn dual_objective(&self) -> f64 {
        let k = kernel_matrix(&self.kernel, &self.inputs);
        let m = self.alphas.len();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += self.alphas[i] * self.alphas[j] * self.labels[i] * self.labels[j] * k[(i, j)];
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.decision_value_unchecked(x))
    }

    pub(crate) fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.labels)
            .zip(&self.inputs)
            .filter(|((a, _), _)| **a != 0.0)
            .map(|((a, y), xi)| a * y * self.kernel.eval(x, xi))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x).map(sign)
    }
}
