//! Colorimetric test-strip classification.
//!
//! Strip images are localized and resampled to a 700 × 100 raster, color
//! corrected, reduced to 12 mean-RGB features (four panels × RGB) and
//! classified with one-vs-one LS-SVM or SMO-trained SVM models. The
//! [`eval`] module provides cross-validation and ROC analysis, and
//! [`synth`] renders labelled strip scenes for end-to-end experiments.

pub mod color;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod image;
pub mod kernel;
pub mod lssvm;
pub mod model_io;
pub mod multiclass;
pub mod svm;
pub mod synth;

pub use dataset::{LabeledDataset, Standardizer};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureMatrix, FeatureVector, LabeledFeatures, PanelLayout};
pub use geometry::{inner_crop, normalize_strip, Point, Quad};
pub use image::{load_image, Encoding, ImageRgb, Rgb, SourceFormat, StripImage};
pub use kernel::{KernelKind, KernelSpec};
pub use lssvm::{train_binary, BinaryLsSvmModel};
pub use model_io::{load_model, save_model};
pub use multiclass::{train, train_multiclass, ClassifierKind, MultiClassModel, Prediction, TrainerConfig};
pub use svm::{train_svm, BinarySvmModel};
