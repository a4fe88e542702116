//! Library side of the `chromaclass` command-line tool.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_crossval, cmd_dualillum, cmd_extract, cmd_predict, cmd_preprocess, cmd_report, cmd_synth, cmd_train,
    parse_corners, per_condition_csv, predictions_csv, PredictInput, PredictionRow,
};
pub use config::{IlluminantSetting, MixtureSetting, RunConfig, RunEcho, SynthSettings};
