//! k-fold cross-validation over any [`Trainer`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::folds::{k_fold_split, FoldPlan};
use crate::eval::metrics::{accuracy, sensitivity, specificity, ConfusionCounts};
use crate::eval::roc::{micro_average_roc, RocCurve};
use crate::multiclass::{train, MultiClassModel, TrainerConfig};

/// Score given to classes a fold's model never saw; below every real score.
const ABSENT_CLASS_SCORE: f64 = -1.0;

/// A fitted multi-class predictor.
pub trait Classifier: Send + Sync {
    fn class_names(&self) -> &[String];
    /// Predicted class (index into `class_names`) and per-class scores.
    fn predict_scores(&self, x: &[f64]) -> Result<(usize, Vec<f64>)>;
}

pub trait Trainer: Sync {
    fn fit(&self, data: &LabeledDataset) -> Result<Box<dyn Classifier>>;
}

impl Classifier for MultiClassModel {
    fn class_names(&self) -> &[String] {
        MultiClassModel::class_names(self)
    }

    fn predict_scores(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let p = self.predict(x)?;
        Ok((p.class, p.scores))
    }
}

impl Trainer for TrainerConfig {
    fn fit(&self, data: &LabeledDataset) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(train(data, self)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub parallel: bool,
}

impl CvOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        CvOptions {
            k,
            seed,
            stratified: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub samples: usize,
    pub counts: ConfusionCounts,
    /// One-vs-rest accuracy, percent.
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub class_names: Vec<String>,
    pub plan: FoldPlan,
    pub predicted: Vec<usize>,
    pub actual: Vec<usize>,
    /// `scores[i][c]`, aligned with `class_names`.
    pub scores: Vec<Vec<f64>>,
    pub per_class: Vec<ClassReport>,
    /// Fraction of samples predicted correctly, percent.
    pub overall_accuracy: f64,
    /// `confusion[actual][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub roc: RocCurve,
    pub auc: f64,
}

impl CvReport {
    pub fn mean_class_accuracy(&self) -> f64 {
        self.per_class.iter().map(|c| c.accuracy).sum::<f64>() / self.per_class.len() as f64
    }
}

struct FoldOutcome {
    test: Vec<usize>,
    predicted: Vec<usize>,
    scores: Vec<Vec<f64>>,
}

fn run_fold(data: &LabeledDataset, plan: &FoldPlan, fold: usize, trainer: &dyn Trainer) -> Result<FoldOutcome> {
    let wrap = |e: Error| Error::Fold {
        fold,
        source: Box::new(e),
    };
    let training = data.subset(&plan.training_indices(fold));
    let model = trainer.fit(&training).map_err(wrap)?;
    // Map model classes onto dataset class indices by name.
    let to_global: Vec<usize> = model
        .class_names()
        .iter()
        .map(|name| {
            data.class_index(name)
                .ok_or_else(|| wrap(Error::UnknownClass(name.clone())))
        })
        .collect::<Result<_>>()?;
    let test = plan.folds[fold].clone();
    let mut predicted = Vec::with_capacity(test.len());
    let mut scores = Vec::with_capacity(test.len());
    for &i in &test {
        let (cls, local) = model.predict_scores(&data.inputs()[i]).map_err(wrap)?;
        let mut row = vec![ABSENT_CLASS_SCORE; data.class_count()];
        for (s, &g) in local.iter().zip(&to_global) {
            row[g] = *s;
        }
        predicted.push(to_global[cls]);
        scores.push(row);
    }
    Ok(FoldOutcome {
        test,
        predicted,
        scores,
    })
}

pub fn cross_validate(data: &LabeledDataset, trainer: &dyn Trainer, options: CvOptions) -> Result<CvReport> {
    let plan = k_fold_split(data.labels(), options.k, options.seed, options.stratified)?;
    cross_validate_plan(data, trainer, plan, options.parallel)
}

/// Cross-validation over a given fold plan.
pub fn cross_validate_plan(
    data: &LabeledDataset,
    trainer: &dyn Trainer,
    plan: FoldPlan,
    parallel: bool,
) -> Result<CvReport> {
    let n = data.len();
    let outcomes: Vec<FoldOutcome> = if parallel {
        (0..plan.k())
            .into_par_iter()
            .map(|f| run_fold(data, &plan, f, trainer))
            .collect::<Result<_>>()?
    } else {
        (0..plan.k())
            .map(|f| run_fold(data, &plan, f, trainer))
            .collect::<Result<_>>()?
    };

    let k_classes = data.class_count();
    let mut predicted = vec![usize::MAX; n];
    let mut scores = vec![Vec::new(); n];
    for out in outcomes {
        for ((i, p), s) in out.test.into_iter().zip(out.predicted).zip(out.scores) {
            if predicted[i] != usize::MAX {
                return Err(Error::InvalidDataset(format!("sample {i} predicted twice")));
            }
            predicted[i] = p;
            scores[i] = s;
        }
    }
    if let Some(i) = predicted.iter().position(|&p| p == usize::MAX) {
        return Err(Error::InvalidDataset(format!("sample {i} never predicted")));
    }
    let actual = data.labels().to_vec();

    let mut confusion = vec![vec![0usize; k_classes]; k_classes];
    for (&a, &p) in actual.iter().zip(&predicted) {
        confusion[a][p] += 1;
    }
    let sizes = data.class_sizes();
    let per_class = (0..k_classes)
        .map(|c| {
            let counts = ConfusionCounts::one_vs_rest(&actual, &predicted, c);
            Ok(ClassReport {
                class: data.class_names()[c].clone(),
                samples: sizes[c],
                counts,
                accuracy: accuracy(&counts)?,
                sensitivity: sensitivity(&counts).ok(),
                specificity: specificity(&counts).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = actual.iter().zip(&predicted).filter(|(a, p)| a == p).count();
    let overall_accuracy = correct as f64 / n as f64 * 100.0;
    let roc = micro_average_roc(&scores, &actual)?;
    let auc = roc.auc();

    Ok(CvReport {
        class_names: data.class_names().to_vec(),
        plan,
        predicted,
        actual,
        scores,
        per_class,
        overall_accuracy,
        confusion,
        roc,
        auc,
    })
}
