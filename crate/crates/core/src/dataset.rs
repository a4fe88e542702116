use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledFeatures;

/// Feature vectors with class labels. `labels[i]` indexes `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let dim = first.len();
            if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: bad.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(LabeledDataset {
            inputs,
            labels,
            class_names,
        })
    }

    /// Builds a dataset from named rows. Classes are indexed in order of
    /// first appearance.
    pub fn from_named(rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut class_names: Vec<String> = Vec::new();
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (name, x) in rows {
            let idx = match class_names.iter().position(|c| *c == name) {
                Some(i) => i,
                None => {
                    class_names.push(name);
                    class_names.len() - 1
                }
            };
            labels.push(idx);
            inputs.push(x);
        }
        LabeledDataset::new(inputs, labels, class_names)
    }

    pub fn from_features(rows: &[LabeledFeatures]) -> Result<Self> {
        Self::from_named(
            rows.iter()
                .map(|r| (r.label.clone(), r.features.as_slice().to_vec())),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Number of samples per class index.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_names.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Rows at `indices`, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn map_inputs(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.iter().map(|x| f(x)).collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Per-dimension z-scoring learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(inputs: &[Vec<f64>]) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::InvalidDataset("cannot standardize an empty set".into()));
        }
        let dim = inputs[0].len();
        let mut mean = vec![0.0; dim];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        // Constant dimensions keep unit scale.
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
