use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    /// Plain dot product. Only used to cross-check solvers.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width σ; ignored by the linear kernel.
    pub sigma: f64,
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(KernelSpec {
            kind: KernelKind::Rbf,
            sigma,
        })
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            sigma: 1.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Rbf => check_sigma(self.sigma),
            KernelKind::Linear => Ok(()),
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-squared_distance(a, b) / (2.0 * self.sigma * self.sigma)).exp(),
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }

    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        self.validate()?;
        Ok(self.eval(a, b))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("RBF sigma must be > 0, got {sigma}")))
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-‖x − x2‖² / (2σ²))`.
pub fn rbf_kernel(x: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    KernelSpec::rbf(sigma)?.evaluate(x, x2)
}

/// Gram matrix over `inputs`; symmetric by construction.
pub fn kernel_matrix(kernel: &KernelSpec, inputs: &[Vec<f64>]) -> DMatrix<f64> {
    let m = inputs.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.eval(&inputs[i], &inputs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Median of the pairwise Euclidean distances, used as the default RBF
/// width. Falls back to 1.0 when every point coincides.
pub fn median_pairwise_distance(inputs: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(inputs.len() * inputs.len().saturating_sub(1) / 2);
    for i in 0..inputs.len() {
        for j in 0..i {
            d.push(squared_distance(&inputs[i], &inputs[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}
