//! Hyperparameter grid search by inner cross-validation.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::cv::{cross_validate, Classifier, CvOptions, Trainer};
use crate::multiclass::{median_sigma, train, ClassifierKind, TrainerConfig};

/// `n` values spaced evenly in log scale from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "log_space needs positive finite bounds and n ≥ 1 (got {lo}, {hi}, {n})"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sigma: f64,
    pub regularization: f64,
    pub accuracy: f64,
    pub auc: f64,
}

/// Searches σ (as multiples of the median-heuristic σ) × γ or C.
///
/// Candidates are ranked by inner-CV accuracy, then AUC; remaining ties go
/// to the earliest grid point. Grids run from wide kernels and weak
/// regularization upward, so ties favour the smoothest model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub base: TrainerConfig,
    pub sigma_scales: Vec<f64>,
    pub regularizations: Vec<f64>,
    pub inner_k: usize,
    pub seed: u64,
}

impl GridSearch {
    /// σ scales 1 … 1/30 and regularization 1 … 1000, four points each.
    pub fn new(base: TrainerConfig, seed: u64) -> Self {
        let mut sigma_scales = log_space(1.0 / 30.0, 1.0, 4).expect("static grid");
        sigma_scales.reverse();
        GridSearch {
            base,
            sigma_scales,
            regularizations: log_space(1.0, 1000.0, 4).expect("static grid"),
            inner_k: 5,
            seed,
        }
    }

    fn candidate(&self, sigma: f64, reg: f64) -> TrainerConfig {
        let mut cfg = self.base.clone();
        cfg.sigma = Some(sigma);
        match cfg.kind {
            ClassifierKind::Lssvm => cfg.gamma = reg,
            ClassifierKind::Svm => cfg.c = reg,
        }
        cfg
    }

    /// Scores every grid point on `data` and returns the chosen config and
    /// the full table.
    pub fn select(&self, data: &LabeledDataset) -> Result<(TrainerConfig, Vec<GridPoint>)> {
        if self.sigma_scales.is_empty() || self.regularizations.is_empty() {
            return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
        }
        let base_sigma = match self.base.sigma {
            Some(s) => s,
            None => median_sigma(data, self.base.standardize)?,
        };
        let inner_k = self.inner_k.min(data.len());
        let mut table = Vec::new();
        let mut best: Option<(usize, f64, f64)> = None;
        for &scale in &self.sigma_scales {
            for &reg in &self.regularizations {
                let sigma = base_sigma * scale;
                let report = cross_validate(
                    data,
                    &self.candidate(sigma, reg),
                    CvOptions {
                        k: inner_k,
                        seed: self.seed,
                        stratified: true,
                        parallel: false,
                    },
                )?;
                let point = GridPoint {
                    sigma,
                    regularization: reg,
                    accuracy: report.overall_accuracy,
                    auc: report.auc,
                };
                let better = match best {
                    None => true,
                    Some((_, acc, auc)) => (point.accuracy, point.auc) > (acc, auc),
                };
                if better {
                    best = Some((table.len(), point.accuracy, point.auc));
                }
                table.push(point);
            }
        }
        let (i, _, _) = best.expect("non-empty grid");
        Ok((self.candidate(table[i].sigma, table[i].regularization), table))
    }
}

impl Trainer for GridSearch {
    fn fit(&self, data: &LabeledDataset) -> Result<Box<dyn Classifier>> {
        let (cfg, _) = self.select(data)?;
        Ok(Box::new(train(data, &cfg)?))
    }
}
