//! Classifier evaluation: confusion metrics, fold plans, ROC curves,
//! cross-validation and report writers.

pub mod cv;
pub mod folds;
pub mod metrics;
pub mod report;
pub mod roc;
pub mod tuning;

pub use cv::{cross_validate, cross_validate_plan, ClassReport, Classifier, CvOptions, CvReport, Trainer};
pub use folds::{k_fold_split, FoldPlan};
pub use metrics::{accuracy, sensitivity, specificity, ConfusionCounts};
pub use roc::{auc, micro_average_roc, multiclass_roc, roc_curve, RocCurve};
pub use tuning::{log_space, GridPoint, GridSearch};
