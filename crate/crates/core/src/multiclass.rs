//! One-vs-one multi-class wrapper shared by the LS-SVM and SVM trainers.
//!
//! Pair `(a, b)` with `a < b` is trained on the samples of those two classes
//! only, with `+1` assigned to class `a`. Prediction is a majority vote;
//! ties go to the larger summed |decision value| over the duels each tied
//! class won, then to the lower class index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::kernel::{median_pairwise_distance, KernelKind, KernelSpec};
use crate::lssvm::{self, check_dim, BinaryLsSvmModel};
use crate::svm::{self, BinarySvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lssvm,
    Svm,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Lssvm => "lssvm",
            ClassifierKind::Svm => "svm",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lssvm" | "ls-svm" => Ok(ClassifierKind::Lssvm),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(Error::InvalidParameter(format!(
                "unknown classifier `{other}` (expected lssvm or svm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BinaryModel {
    Lssvm(BinaryLsSvmModel),
    Svm(BinarySvmModel),
}

impl BinaryModel {
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        match self {
            BinaryModel::Lssvm(m) => m.decision_value(x),
            BinaryModel::Svm(m) => m.decision_value(x),
        }
    }

    fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            BinaryModel::Lssvm(m) => m.decision_value_unchecked(x),
            BinaryModel::Svm(m) => m.decision_value_unchecked(x),
        }
    }

    fn dim(&self) -> usize {
        match self {
            BinaryModel::Lssvm(m) => m.dim(),
            BinaryModel::Svm(m) => m.dim(),
        }
    }
}

/// Binary model for one class pair; `positive < negative` index into
/// [`MultiClassModel::class_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub model: BinaryModel,
}

/// Trainer settings. `sigma = None` selects the median pairwise distance of
/// the (possibly standardized) training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub kind: ClassifierKind,
    pub sigma: Option<f64>,
    pub gamma: f64,
    pub c: f64,
    pub standardize: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            kind: ClassifierKind::Lssvm,
            sigma: None,
            gamma: lssvm::DEFAULT_GAMMA,
            c: svm::DEFAULT_C,
            standardize: false,
        }
    }
}

impl TrainerConfig {
    pub fn lssvm() -> Self {
        Self::default()
    }

    pub fn svm() -> Self {
        TrainerConfig {
            kind: ClassifierKind::Svm,
            ..Self::default()
        }
    }

    /// Regularization weight for the selected kind (γ or C).
    pub fn regularization(&self) -> f64 {
        match self.kind {
            ClassifierKind::Lssvm => self.gamma,
            ClassifierKind::Svm => self.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassModel {
    pub(crate) kind: ClassifierKind,
    pub(crate) kernel: KernelSpec,
    pub(crate) regularization: f64,
    pub(crate) class_names: Vec<String>,
    pub(crate) pairs: Vec<PairModel>,
    pub(crate) standardizer: Option<Standardizer>,
}

/// Outcome of one multi-class prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Index into the model's class list.
    pub class: usize,
    pub votes: Vec<usize>,
    /// Summed |decision value| over duels won.
    pub won_margins: Vec<f64>,
    /// Per-class ranking score in `[0, K)`: votes plus a fractional part
    /// increasing in the class's mean signed decision value.
    pub scores: Vec<f64>,
}

/// Trains the one-vs-one LS-SVM ensemble with an explicit kernel and γ.
pub fn train_multiclass(data: &LabeledDataset, kernel: KernelSpec, gamma: f64) -> Result<MultiClassModel> {
    let config = TrainerConfig {
        kind: ClassifierKind::Lssvm,
        sigma: Some(kernel.sigma),
        gamma,
        ..TrainerConfig::default()
    };
    train_with_kernel(data, &config, kernel, None)
}

/// The σ that `sigma = None` resolves to for this training set.
pub fn median_sigma(data: &LabeledDataset, standardize: bool) -> Result<f64> {
    if standardize {
        let s = Standardizer::fit(data.inputs())?;
        let z: Vec<Vec<f64>> = data.inputs().iter().map(|x| s.transform(x)).collect();
        Ok(median_pairwise_distance(&z))
    } else {
        Ok(median_pairwise_distance(data.inputs()))
    }
}

/// Trains a one-vs-one ensemble of the configured kind.
pub fn train(data: &LabeledDataset, config: &TrainerConfig) -> Result<MultiClassModel> {
    let standardizer = if config.standardize {
        Some(Standardizer::fit(data.inputs())?)
    } else {
        None
    };
    let data = match &standardizer {
        Some(s) => data.map_inputs(|x| s.transform(x)),
        None => data.clone(),
    };
    let sigma = config
        .sigma
        .unwrap_or_else(|| median_pairwise_distance(data.inputs()));
    let kernel = KernelSpec::rbf(sigma)?;
    train_with_kernel(&data, config, kernel, standardizer)
}

fn train_with_kernel(
    data: &LabeledDataset,
    config: &TrainerConfig,
    kernel: KernelSpec,
    standardizer: Option<Standardizer>,
) -> Result<MultiClassModel> {
    // Classes absent from `data` are dropped; the model predicts only the
    // classes it saw.
    let sizes = data.class_sizes();
    let present: Vec<usize> = (0..data.class_count()).filter(|&c| sizes[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 classes with samples, found {}",
            present.len()
        )));
    }
    let class_names: Vec<String> = present
        .iter()
        .map(|&c| data.class_names()[c].clone())
        .collect();

    let mut pair_ids = Vec::new();
    for a in 0..present.len() {
        for b in a + 1..present.len() {
            pair_ids.push((a, b));
        }
    }

    let pairs = pair_ids
        .par_iter()
        .map(|&(a, b)| {
            let (ga, gb) = (present[a], present[b]);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (x, &l) in data.inputs().iter().zip(data.labels()) {
                if l == ga {
                    xs.push(x.clone());
                    ys.push(1.0);
                } else if l == gb {
                    xs.push(x.clone());
                    ys.push(-1.0);
                }
            }
            let model = match config.kind {
                ClassifierKind::Lssvm => {
                    lssvm::train_binary(&xs, &ys, kernel, config.gamma).map(BinaryModel::Lssvm)
                }
                ClassifierKind::Svm => svm::train_svm(&xs, &ys, kernel, config.c).map(BinaryModel::Svm),
            }
            .map_err(|e| Error::PairTraining {
                first: class_names[a].clone(),
                second: class_names[b].clone(),
                source: Box::new(e),
            })?;
            Ok(PairModel {
                positive: a,
                negative: b,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MultiClassModel {
        kind: config.kind,
        kernel,
        regularization: config.regularization(),
        class_names,
        pairs,
        standardizer,
    })
}

impl MultiClassModel {
    /// Assembles a model from pre-built pair models.
    pub fn from_parts(
        kind: ClassifierKind,
        kernel: KernelSpec,
        regularization: f64,
        class_names: Vec<String>,
        pairs: Vec<PairModel>,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        let k = class_names.len();
        if k < 2 {
            return Err(Error::InvalidParameter("a multi-class model needs ≥ 2 classes".into()));
        }
        let mut seen = vec![false; k * k];
        for p in &pairs {
            if p.positive >= p.negative || p.negative >= k {
                return Err(Error::InvalidParameter(format!(
                    "invalid class pair ({}, {})",
                    p.positive, p.negative
                )));
            }
            let slot = p.positive * k + p.negative;
            if seen[slot] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate class pair ({}, {})",
                    p.positive, p.negative
                )));
            }
            seen[slot] = true;
        }
        if pairs.len() != k * (k - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{} classes need {} pair models, got {}",
                k,
                k * (k - 1) / 2,
                pairs.len()
            )));
        }
        Ok(MultiClassModel {
            kind,
            kernel,
            regularization,
            class_names,
            pairs,
            standardizer,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn sigma(&self) -> f64 {
        match self.kernel.kind {
            KernelKind::Rbf => self.kernel.sigma,
            KernelKind::Linear => f64::NAN,
        }
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn pairs(&self) -> &[PairModel] {
        &self.pairs
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.model.dim())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.dim(), x)?;
        let transformed;
        let x = match &self.standardizer {
            Some(s) => {
                transformed = s.transform(x);
                &transformed[..]
            }
            None => x,
        };
        let k = self.class_names.len();
        let mut votes = vec![0usize; k];
        let mut won_margins = vec![0.0; k];
        let mut signed = vec![0.0; k];
        for pair in &self.pairs {
            let dv = pair.model.decision_value_unchecked(x);
            let (winner, _) = if dv >= 0.0 {
                (pair.positive, pair.negative)
            } else {
                (pair.negative, pair.positive)
            };
            votes[winner] += 1;
            won_margins[winner] += dv.abs();
            signed[pair.positive] += dv;
            signed[pair.negative] -= dv;
        }
        let mut best = 0;
        for c in 1..k {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && won_margins[c] > won_margins[best]);
            if better {
                best = c;
            }
        }
        let duels = (k - 1) as f64;
        let scores = (0..k)
            .map(|c| votes[c] as f64 + 0.5 + (signed[c] / duels).atan() / std::f64::consts::PI)
            .collect();
        Ok(Prediction {
            class: best,
            votes,
            won_margins,
            scores,
        })
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        self.predict(x).map(|p| p.class)
    }

    pub fn predict_name(&self, x: &[f64]) -> Result<&str> {
        self.predict(x).map(|p| self.class_names[p.class].as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn constant_pair(positive: usize, negative: usize, value: f64) -> PairModel {
        PairModel {
            positive,
            negative,
            model: BinaryModel::Lssvm(
                BinaryLsSvmModel::from_parts(
                    vec![0.0, 0.0],
                    value,
                    vec![vec![0.0], vec![1.0]],
                    vec![1.0, -1.0],
                    KernelSpec::rbf(1.0).unwrap(),
                    1.0,
                )
                .unwrap(),
            ),
        }
    }

    fn clusters(rng: &mut ChaCha8Rng, per_class: usize, noise: f64) -> (LabeledDataset, Vec<Vec<f64>>) {
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..12).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let normal = Normal::new(0.0, noise).unwrap();
        let mut rows = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                let x = center.iter().map(|v| v + normal.sample(rng)).collect();
                rows.push((format!("c{c}"), x));
            }
        }
        (LabeledDataset::from_named(rows).unwrap(), centers)
    }

    #[test]
    fn two_classes_equal_binary_model() {
        let ds = LabeledDataset::from_named(vec![
            ("a".into(), vec![1.0]),
            ("b".into(), vec![-1.0]),
        ])
        .unwrap();
        let k = KernelSpec::rbf(1.0).unwrap();
        let multi = train_multiclass(&ds, k, 1.0).unwrap();
        assert_eq!(multi.pairs().len(), 1);
        let bin = lssvm::train_binary(&[vec![1.0], vec![-1.0]], &[1.0, -1.0], k, 1.0).unwrap();
        assert_eq!(multi.pairs()[0].model, BinaryModel::Lssvm(bin.clone()));
        for x in [-2.0, -0.3, 0.0, 0.4, 1.5] {
            let want = if bin.predict(&[x]).unwrap() > 0.0 { 0 } else { 1 };
            assert_eq!(multi.predict_class(&[x]).unwrap(), want);
        }
    }

    #[test]
    fn fifteen_classes_give_105_pairs() {
        let rows = (0..15).flat_map(|c| {
            (0..2).map(move |i| (format!("pH{c}.0"), vec![c as f64 + 0.1 * i as f64, 0.5]))
        });
        let ds = LabeledDataset::from_named(rows).unwrap();
        let model = train_multiclass(&ds, KernelSpec::rbf(1.0).unwrap(), 1.0).unwrap();
        assert_eq!(model.pairs().len(), 105);
    }

    #[test]
    fn separated_clusters_are_fit_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (ds, centers) = clusters(&mut rng, 20, 0.01);
        for config in [TrainerConfig::lssvm(), TrainerConfig::svm()] {
            let model = train(&ds, &config).unwrap();
            for (x, &l) in ds.inputs().iter().zip(ds.labels()) {
                assert_eq!(model.predict_class(x).unwrap(), l);
            }
            for (c, center) in centers.iter().enumerate() {
                assert_eq!(model.predict_class(center).unwrap(), c);
            }
        }
    }

    #[test]
    fn vote_cycle_resolved_by_margin() {
        // 0 beats 1 by 0.2, 1 beats 2 by 0.9, 2 beats 0 by 0.5.
        let pairs = vec![
            constant_pair(0, 1, 0.2),
            constant_pair(1, 2, 0.9),
            constant_pair(0, 2, -0.5),
        ];
        let model = MultiClassModel::from_parts(
            ClassifierKind::Lssvm,
            KernelSpec::rbf(1.0).unwrap(),
            1.0,
            vec!["a".into(), "b".into(), "c".into()],
            pairs,
            None,
        )
        .unwrap();
        let p = model.predict(&[0.0]).unwrap();
        assert_eq!(p.votes, vec![1, 1, 1]);
        assert_eq!(p.class, 1);
        assert!((p.won_margins[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn full_tie_goes_to_lowest_index() {
        let pairs = vec![
            constant_pair(0, 1, 0.5),
            constant_pair(1, 2, 0.5),
            constant_pair(0, 2, -0.5),
        ];
        let model = MultiClassModel::from_parts(
            ClassifierKind::Lssvm,
            KernelSpec::rbf(1.0).unwrap(),
            1.0,
            vec!["a".into(), "b".into(), "c".into()],
            pairs,
            None,
        )
        .unwrap();
        assert_eq!(model.predict_class(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn scores_rank_winner_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (ds, _) = clusters(&mut rng, 10, 0.02);
        let model = train(&ds, &TrainerConfig::lssvm()).unwrap();
        for x in ds.inputs() {
            let p = model.predict(x).unwrap();
            let top = (0..3).max_by(|&a, &b| p.scores[a].total_cmp(&p.scores[b])).unwrap();
            assert_eq!(top, p.class);
            assert!(p.scores.iter().all(|s| (0.0..3.0).contains(s)));
        }
    }

    #[test]
    fn missing_pair_rejected() {
        let err = MultiClassModel::from_parts(
            ClassifierKind::Lssvm,
            KernelSpec::rbf(1.0).unwrap(),
            1.0,
            vec!["a".into(), "b".into(), "c".into()],
            vec![constant_pair(0, 1, 0.1), constant_pair(0, 2, 0.1)],
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn wrong_dimension_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (ds, _) = clusters(&mut rng, 4, 0.02);
        let model = train(&ds, &TrainerConfig::lssvm()).unwrap();
        assert!(matches!(
            model.predict(&[0.0; 11]),
            Err(Error::DimensionMismatch { expected: 12, actual: 11 })
        ));
    }

    #[test]
    fn single_class_rejected() {
        let ds = LabeledDataset::from_named(vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]).unwrap();
        assert!(train(&ds, &TrainerConfig::lssvm()).is_err());
    }
}
