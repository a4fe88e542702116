use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome counts of a binary (or one-vs-rest) test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, true_neg: u64, false_pos: u64, false_neg: u64) -> Self {
        ConfusionCounts {
            true_pos,
            true_neg,
            false_pos,
            false_neg,
        }
    }

    /// One-vs-rest counts for `class` from paired actual/predicted labels.
    pub fn one_vs_rest(actual: &[usize], predicted: &[usize], class: usize) -> Self {
        let mut c = ConfusionCounts::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a == class, p == class) {
                (true, true) => c.true_pos += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_pos += 1,
                (true, false) => c.false_neg += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// `(TP + TN) / (TP + TN + FP + FN) × 100`.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    ratio(c.true_pos + c.true_neg, c.total(), "accuracy with zero total")
}

/// `TP / (TP + FN) × 100`.
pub fn sensitivity(c: &ConfusionCounts) -> Result<f64> {
    ratio(c.true_pos, c.true_pos + c.false_neg, "sensitivity with no actual positives")
}

/// `TN / (TN + FP) × 100`, reported in percent like the other two rates.
pub fn specificity(c: &ConfusionCounts) -> Result<f64> {
    ratio(c.true_neg, c.true_neg + c.false_pos, "specificity with no actual negatives")
}

fn ratio(num: u64, den: u64, what: &str) -> Result<f64> {
    if den == 0 {
        return Err(Error::UndefinedMetric(what.into()));
    }
    Ok(num as f64 / den as f64 * 100.0)
}
