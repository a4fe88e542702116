//! Binary least-squares SVM.
//!
//! Training minimizes `½‖λ‖² + γ·½Σ eᵢ²` subject to
//! `yᵢ(λᵀg(xᵢ) + b) = 1 − eᵢ`. Eliminating λ and e from the Lagrangian
//! stationarity conditions leaves the bordered system
//!
//! ```text
//! ┌ 0   yᵀ ┐ ┌ b ┐   ┌ 0 ┐
//! └ y   Ω  ┘ └ α ┘ = └ 1 ┘,   Ωᵢⱼ = yᵢyⱼκ(xᵢ, xⱼ) + δᵢⱼ/γ
//! ```
//!
//! Ω is symmetric positive definite for γ > 0, so it is Cholesky-factored and
//! the border is eliminated through its Schur complement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec};

/// Largest accepted relative residual of the solved KKT system.
pub const KKT_RESIDUAL_TOL: f64 = 1e-8;

pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLsSvmModel {
    pub(crate) alphas: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) training_inputs: Vec<Vec<f64>>,
    pub(crate) training_labels: Vec<f64>,
    pub(crate) kernel: KernelSpec,
    pub(crate) gamma: f64,
}

/// Checks shared by the binary trainers.
pub(crate) fn check_binary_problem(inputs: &[Vec<f64>], labels: &[f64]) -> Result<()> {
    if inputs.len() != labels.len() {
        return Err(Error::InvalidDataset(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 training samples, got {}",
            inputs.len()
        )));
    }
    let dim = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidDataset(format!("binary labels must be ±1, got {bad}")));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::InvalidDataset(
            "binary training needs both classes present".into(),
        ));
    }
    Ok(())
}

/// Solves the LS-SVM KKT system for `(α, b)`.
pub fn train_binary(
    inputs: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    gamma: f64,
) -> Result<BinaryLsSvmModel> {
    check_binary_problem(inputs, labels)?;
    kernel.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    let m = inputs.len();
    let k = kernel_matrix(&kernel, inputs);
    let y = DVector::from_column_slice(labels);
    let omega = DMatrix::from_fn(m, m, |i, j| {
        y[i] * y[j] * k[(i, j)] + if i == j { 1.0 / gamma } else { 0.0 }
    });

    let chol = omega.clone().cholesky().ok_or_else(|| {
        Error::SingularSystem(format!(
            "Cholesky factorization of the {m}x{m} regularized kernel block failed (gamma = {gamma})"
        ))
    })?;
    let ones = DVector::from_element(m, 1.0);
    let eta = chol.solve(&ones);
    let nu = chol.solve(&y);
    let s = y.dot(&nu);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::SingularSystem(format!(
            "Schur complement yᵀΩ⁻¹y = {s} is not positive"
        )));
    }
    let bias = y.dot(&eta) / s;
    let alpha = &eta - &nu * bias;

    let residual = kkt_relative_residual(&omega, &y, bias, &alpha);
    if residual.is_nan() || residual > KKT_RESIDUAL_TOL {
        return Err(Error::SingularSystem(format!(
            "relative KKT residual {residual:.3e} exceeds {KKT_RESIDUAL_TOL:e}"
        )));
    }

    Ok(BinaryLsSvmModel {
        alphas: alpha.iter().copied().collect(),
        bias,
        training_inputs: inputs.to_vec(),
        training_labels: labels.to_vec(),
        kernel,
        gamma,
    })
}

/// `‖A·z − r‖ / ‖r‖` for the bordered system.
fn kkt_relative_residual(omega: &DMatrix<f64>, y: &DVector<f64>, b: f64, alpha: &DVector<f64>) -> f64 {
    let top = y.dot(alpha);
    let rest = omega * alpha + y * b - DVector::from_element(y.len(), 1.0);
    (top * top + rest.norm_squared()).sqrt() / (y.len() as f64).sqrt()
}

impl BinaryLsSvmModel {
    /// Assembles a model from explicit parameters.
    pub fn from_parts(
        alphas: Vec<f64>,
        bias: f64,
        training_inputs: Vec<Vec<f64>>,
        training_labels: Vec<f64>,
        kernel: KernelSpec,
        gamma: f64,
    ) -> Result<Self> {
        if alphas.len() != training_inputs.len() || alphas.len() != training_labels.len() {
            return Err(Error::InvalidParameter(
                "alphas, inputs and labels must have equal length".into(),
            ));
        }
        kernel.validate()?;
        Ok(BinaryLsSvmModel {
            alphas,
            bias,
            training_inputs,
            training_labels,
            kernel,
            gamma,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.training_inputs
    }

    pub fn training_labels(&self) -> &[f64] {
        &self.training_labels
    }

    pub fn dim(&self) -> usize {
        self.training_inputs.first().map_or(0, Vec::len)
    }

    /// Slack `eᵢ = αᵢ/γ` of each training point.
    pub fn slacks(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a / self.gamma).collect()
    }

    /// `Σ αᵢ yᵢ κ(x, xᵢ) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.decision_value_unchecked(x))
    }

    pub(crate) fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.training_labels)
            .zip(&self.training_inputs)
            .map(|((a, y), xi)| a * y * self.kernel.eval(x, xi))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x).map(sign)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        })
    }
}

/// Sign with the tie `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
