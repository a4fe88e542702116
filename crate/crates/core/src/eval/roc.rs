use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::multiclass::MultiClassModel;

/// ROC points `(1 − specificity, sensitivity)` as fractions, from `(0, 0)`
/// to `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
            .sum()
    }
}

pub fn auc(curve: &RocCurve) -> f64 {
    curve.auc()
}

/// Sweeps the threshold over every distinct score (descending); a sample is
/// called positive when its score is ≥ the threshold. Tied scores enter
/// together, producing a diagonal step.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter(
            "ROC needs at least one positive and one negative sample".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve { points })
}

/// Micro-averaged one-vs-rest ROC over a score matrix (`scores[i][c]` is the
/// score of class `c` for sample `i`): every (sample, class) cell becomes a
/// pooled binary observation that is positive iff `c` is the sample's class.
///
/// With two classes both one-vs-rest problems are the same binary problem,
/// so the curve is that problem's curve, ranked by `scores[i][0] − scores[i][1]`.
pub fn micro_average_roc(scores: &[Vec<f64>], labels: &[usize]) -> Result<RocCurve> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("no samples for ROC".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} score rows but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let k = scores[0].len();
    if scores.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidParameter("ragged score matrix".into()));
    }
    if k == 2 {
        let diff: Vec<f64> = scores.iter().map(|s| s[0] - s[1]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == 0).collect();
        return roc_curve(&diff, &pos);
    }
    let mut pooled = Vec::with_capacity(scores.len() * k);
    let mut pos = Vec::with_capacity(scores.len() * k);
    for (row, &label) in scores.iter().zip(labels) {
        for (c, &s) in row.iter().enumerate() {
            pooled.push(s);
            pos.push(c == label);
        }
    }
    roc_curve(&pooled, &pos)
}

/// Micro-averaged ROC of a trained model on labeled data. Data labels are
/// matched to model classes by name.
pub fn multiclass_roc(model: &MultiClassModel, data: &LabeledDataset) -> Result<RocCurve> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation data".into()));
    }
    let mut scores = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for (x, &l) in data.inputs().iter().zip(data.labels()) {
        let name = &data.class_names()[l];
        let idx = model
            .class_names()
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.clone()))?;
        scores.push(model.predict(x)?.scores);
        labels.push(idx);
    }
    micro_average_roc(&scores, &labels)
}
