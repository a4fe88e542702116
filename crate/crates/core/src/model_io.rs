//! Versioned JSON model files.
//!
//! ```text
//! { "format": "chromaclass-model", "version": 1,
//!   "checksum": "<sha256 of the compact `model` object>",
//!   "model": { "classifier", "kernel", "regularization", "classes",
//!              "standardizer", "pairs": [{ positive, negative, alphas,
//!              bias, inputs, labels }] } }
//! ```
//!
//! Floats are written in shortest round-trip form, so a reloaded model
//! reproduces decision values bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::lssvm::BinaryLsSvmModel;
use crate::multiclass::{BinaryModel, ClassifierKind, MultiClassModel, PairModel};
use crate::svm::BinarySvmModel;

pub const MODEL_FORMAT: &str = "chromaclass-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    checksum: String,
    model: ModelBody,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelBody {
    classifier: ClassifierKind,
    kernel: KernelSpec,
    regularization: f64,
    classes: Vec<String>,
    standardizer: Option<Standardizer>,
    pairs: Vec<PairEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairEntry {
    positive: usize,
    negative: usize,
    alphas: Vec<f64>,
    bias: f64,
    inputs: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn checksum(body: &ModelBody) -> Result<String> {
    let bytes = serde_json::to_vec(body).map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn to_body(model: &MultiClassModel) -> ModelBody {
    let pairs = model
        .pairs
        .iter()
        .map(|p| {
            let (alphas, bias, inputs, labels) = match &p.model {
                BinaryModel::Lssvm(m) => (
                    m.alphas.clone(),
                    m.bias,
                    m.training_inputs.clone(),
                    m.training_labels.clone(),
                ),
                BinaryModel::Svm(m) => (m.alphas.clone(), m.bias, m.inputs.clone(), m.labels.clone()),
            };
            PairEntry {
                positive: p.positive,
                negative: p.negative,
                alphas,
                bias,
                inputs,
                labels,
            }
        })
        .collect();
    ModelBody {
        classifier: model.kind,
        kernel: model.kernel,
        regularization: model.regularization,
        classes: model.class_names.clone(),
        standardizer: model.standardizer.clone(),
        pairs,
    }
}

fn from_body(body: ModelBody) -> Result<MultiClassModel> {
    let pairs = body
        .pairs
        .into_iter()
        .map(|p| {
            let model = match body.classifier {
                ClassifierKind::Lssvm => BinaryModel::Lssvm(BinaryLsSvmModel::from_parts(
                    p.alphas,
                    p.bias,
                    p.inputs,
                    p.labels,
                    body.kernel,
                    body.regularization,
                )?),
                ClassifierKind::Svm => BinaryModel::Svm(BinarySvmModel::from_parts(
                    p.alphas,
                    p.bias,
                    p.inputs,
                    p.labels,
                    body.kernel,
                    body.regularization,
                )?),
            };
            Ok(PairModel {
                positive: p.positive,
                negative: p.negative,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultiClassModel::from_parts(
        body.classifier,
        body.kernel,
        body.regularization,
        body.classes,
        pairs,
        body.standardizer,
    )
    .map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn model_to_string(model: &MultiClassModel) -> Result<String> {
    let body = to_body(model);
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        checksum: checksum(&body)?,
        model: body,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<MultiClassModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "unexpected format tag `{}`",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (this build reads version {MODEL_VERSION})",
            file.version
        )));
    }
    let actual = checksum(&file.model)?;
    if actual != file.checksum {
        return Err(Error::ModelFormat(format!(
            "checksum mismatch: file says {}, content hashes to {actual}",
            file.checksum
        )));
    }
    from_body(file.model)
}

pub fn save_model(model: &MultiClassModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = model_to_string(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiClassModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text).map_err(|e| match e {
        Error::ModelFormat(m) => Error::ModelFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}
