//! Subcommand implementations. Each command writes into its own run
//! directory and returns its path.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chromaclass::eval::report::{confusion_csv, per_class_csv, roc_csv, roc_svg};
use chromaclass::eval::{cross_validate_plan, k_fold_split, CvReport, GridSearch, Trainer};
use chromaclass::features::{read_features_csv, write_features_csv};
use chromaclass::image::{save_png, STRIP_COLS, STRIP_ROWS};
use chromaclass::synth::{archive_depth, generate_dataset, read_manifest, write_manifest, ManifestEntry};
use chromaclass::{
    extract_features, inner_crop, load_image, normalize_strip, train, ClassifierKind, Encoding, LabeledDataset,
    LabeledFeatures, MultiClassModel, PanelLayout, Point, Quad, SourceFormat, StripImage, TrainerConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, RunEcho};

/// Creates `<out>/run-<hash8>-s<seed>` and writes the config echo.
pub fn prepare_run(out: &Path, command: &str, config: &RunConfig, inputs: &[(&str, &Path)]) -> Result<PathBuf> {
    let echo = RunEcho::new(command, config, inputs)?;
    let dir = out.join(echo.dir_name()?);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join("run.toml"), &echo.to_toml()?)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &toml::to_string(value)?)
}

fn load_features(path: &Path) -> Result<(Vec<LabeledFeatures>, LabeledDataset)> {
    let rows = read_features_csv(path)?;
    ensure!(!rows.is_empty(), "{}: no feature rows", path.display());
    let data = LabeledDataset::from_features(&rows).with_context(|| format!("dataset {}", path.display()))?;
    Ok((rows, data))
}

/// 16-bit files are linear captures, 8-bit ones display-referred.
fn format_of(encoding: Encoding) -> SourceFormat {
    match encoding {
        Encoding::Linear => SourceFormat::Raw,
        Encoding::DisplayReferred => SourceFormat::Jpeg,
    }
}

pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<PathBuf> {
    let dataset_config = config.dataset_config()?;
    dataset_config.validate()?;
    let dir = prepare_run(out, "synth", config, &[])?;
    let images = dir.join("images");
    let generated = generate_dataset(&dataset_config, Some((&images, config.synth.images)))?;
    write_manifest(dir.join("manifest.csv"), &generated.manifest())?;
    write_features_csv(dir.join("features.csv"), &generated.labeled_features())?;
    Ok(dir)
}

/// Localizes and inner-crops every scene listed in `manifest`.
pub fn cmd_preprocess(config: &RunConfig, manifest: &Path, images: &Path, out: &Path) -> Result<PathBuf> {
    let entries = read_manifest(manifest)?;
    let dir = prepare_run(out, "preprocess", config, &[("manifest", manifest)])?;
    let strips_dir = dir.join("images");
    std::fs::create_dir_all(&strips_dir).with_context(|| format!("creating {}", strips_dir.display()))?;
    let full = Quad::rect(0.0, 0.0, STRIP_COLS as f64, STRIP_ROWS as f64)?;
    let written = entries
        .par_iter()
        .map(|e| -> Result<ManifestEntry> {
            let path = images.join(&e.filename);
            let scene = load_image(&path)?;
            let format = format_of(scene.encoding());
            let quad = Quad::new(e.corners).with_context(|| format!("corners of {}", e.filename))?;
            let strip = normalize_strip(&scene, &quad, format).with_context(|| format!("{}", path.display()))?;
            let cropped = inner_crop(&strip, config.inner_margin)?;
            save_png(&cropped.to_image(), strips_dir.join(&e.filename), archive_depth(format))?;
            Ok(ManifestEntry {
                corners: full.corners,
                ..e.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(dir.join("manifest.csv"), &written)?;
    Ok(dir)
}

/// Reads preprocessed 700 × 100 strips and writes `features.csv`.
pub fn cmd_extract(config: &RunConfig, manifest: &Path, images: &Path, out: &Path) -> Result<PathBuf> {
    let entries = read_manifest(manifest)?;
    let layout = PanelLayout::quarters(config.panel_margin)?;
    let dir = prepare_run(out, "extract", config, &[("manifest", manifest)])?;
    let rows = entries
        .par_iter()
        .map(|e| -> Result<LabeledFeatures> {
            let path = images.join(&e.filename);
            let image = load_image(&path)?;
            if (image.width(), image.height()) != (STRIP_COLS, STRIP_ROWS) {
                bail!(
                    "{}: expected a preprocessed {}x{} strip, got {}x{}",
                    path.display(),
                    STRIP_COLS,
                    STRIP_ROWS,
                    image.width(),
                    image.height()
                );
            }
            let strip = StripImage::from_image(&image, format_of(image.encoding()))?;
            Ok(LabeledFeatures {
                label: e.class.clone(),
                features: extract_features(&strip, &layout)?.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_features_csv(dir.join("features.csv"), &rows)?;
    Ok(dir)
}

/// Trainer for `config`, tuned on `data` by inner cross-validation when
/// `config.tune` is set.
pub fn resolve_trainer(config: &RunConfig, kind: ClassifierKind, data: &LabeledDataset) -> Result<TrainerConfig> {
    let mut base = config.trainer();
    base.kind = kind;
    if config.tune {
        Ok(GridSearch::new(base, config.seed).select(data)?.0)
    } else {
        Ok(base)
    }
}

#[derive(Serialize)]
struct TrainSummary {
    classifier: ClassifierKind,
    samples: usize,
    classes: Vec<String>,
    pairs: usize,
    sigma: f64,
    regularization: f64,
    training_accuracy: f64,
}

pub fn cmd_train(config: &RunConfig, features: &Path, out: &Path) -> Result<PathBuf> {
    let (_, data) = load_features(features)?;
    let trainer = resolve_trainer(config, config.classifier, &data)?;
    let model = train(&data, &trainer)?;
    let dir = prepare_run(out, "train", config, &[("features", features)])?;
    chromaclass::save_model(&model, dir.join("model.json"))?;
    let mut correct = 0;
    for (x, &y) in data.inputs().iter().zip(data.labels()) {
        let name = model.predict_name(x)?;
        correct += usize::from(name == data.class_names()[y]);
    }
    write_toml(
        &dir.join("summary.toml"),
        &TrainSummary {
            classifier: model.kind(),
            samples: data.len(),
            classes: model.class_names().to_vec(),
            pairs: model.pairs().len(),
            sigma: model.sigma(),
            regularization: model.regularization(),
            training_accuracy: 100.0 * correct as f64 / data.len() as f64,
        },
    )?;
    Ok(dir)
}

/// Input to `predict`.
pub enum PredictInput<'a> {
    Features(&'a Path),
    Image {
        path: &'a Path,
        corners: Option<Quad>,
    },
}

/// One predicted label with its vote and margin diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub input: String,
    pub predicted: String,
    /// `(class, votes, summed winning margin)` in model class order.
    pub diagnostics: Vec<(String, usize, f64)>,
}

/// CSV with `input,predicted` then a `votes:<class>` and `margin:<class>`
/// column per class.
pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("input,predicted");
    if let Some(first) = rows.first() {
        for (c, _, _) in &first.diagnostics {
            let _ = write!(out, ",votes:{c}");
        }
        for (c, _, _) in &first.diagnostics {
            let _ = write!(out, ",margin:{c}");
        }
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.input, r.predicted);
        for (_, v, _) in &r.diagnostics {
            let _ = write!(out, ",{v}");
        }
        for (_, _, m) in &r.diagnostics {
            let _ = write!(out, ",{m:.6}");
        }
        out.push('\n');
    }
    out
}

fn predict_row(model: &MultiClassModel, input: String, x: &[f64]) -> Result<PredictionRow> {
    let p = model.predict(x)?;
    let names = model.class_names();
    Ok(PredictionRow {
        input,
        predicted: names[p.class].clone(),
        diagnostics: names
            .iter()
            .zip(p.votes.iter().zip(&p.won_margins))
            .map(|(n, (&v, &m))| (n.clone(), v, m))
            .collect(),
    })
}

/// Parses `x0,y0,x1,y1,x2,y2,x3,y3`.
pub fn parse_corners(text: &str) -> Result<Quad> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad corner value `{s}`")))
        .collect::<Result<_>>()?;
    ensure!(v.len() == 8, "corners need 8 numbers, got {}", v.len());
    Ok(Quad::new(std::array::from_fn(|i| Point::new(v[2 * i], v[2 * i + 1])))?)
}

/// Without corners the image must already be a preprocessed strip. The
/// rows are also written to `predictions.csv` in the run directory.
pub fn cmd_predict(
    config: &RunConfig,
    model_path: &Path,
    input: PredictInput,
    out: &Path,
) -> Result<(PathBuf, Vec<PredictionRow>)> {
    let model = chromaclass::load_model(model_path)?;
    let input_path = match &input {
        PredictInput::Features(p) => ("features", *p),
        PredictInput::Image { path, .. } => ("image", *path),
    };
    let rows = predict_rows(config, &model, input)?;
    let dir = prepare_run(out, "predict", config, &[("model", model_path), input_path])?;
    write_text(&dir.join("predictions.csv"), &predictions_csv(&rows))?;
    Ok((dir, rows))
}

fn predict_rows(config: &RunConfig, model: &MultiClassModel, input: PredictInput) -> Result<Vec<PredictionRow>> {
    match input {
        PredictInput::Features(path) => {
            let rows = read_features_csv(path)?;
            rows.iter()
                .enumerate()
                .map(|(i, r)| predict_row(model, format!("{}#{}", path.display(), i + 1), r.features.as_slice()))
                .collect()
        }
        PredictInput::Image { path, corners } => {
            let image = load_image(path)?;
            let format = format_of(image.encoding());
            let strip = match corners {
                Some(q) => inner_crop(&normalize_strip(&image, &q, format)?, config.inner_margin)?,
                None => {
                    ensure!(
                        (image.width(), image.height()) == (STRIP_COLS, STRIP_ROWS),
                        "{}: not a {}x{} strip; pass --corners",
                        path.display(),
                        STRIP_COLS,
                        STRIP_ROWS
                    );
                    StripImage::from_image(&image, format)?
                }
            };
            let layout = PanelLayout::quarters(config.panel_margin)?;
            let (_, f) = extract_features(&strip, &layout)?;
            Ok(vec![predict_row(model, path.display().to_string(), f.as_slice())?])
        }
    }
}

#[derive(Serialize)]
struct CvSummary {
    classifier: ClassifierKind,
    samples: usize,
    k: usize,
    sigma: Option<f64>,
    regularization: f64,
    overall_accuracy: f64,
    mean_class_accuracy: f64,
    auc: f64,
}

/// The tuned trainer, resolved inside each fold so the held-out fold never
/// influences hyperparameters.
struct FoldTrainer<'a> {
    config: &'a RunConfig,
    kind: ClassifierKind,
}

impl Trainer for FoldTrainer<'_> {
    fn fit(&self, data: &LabeledDataset) -> chromaclass::Result<Box<dyn chromaclass::eval::Classifier>> {
        let mut base = self.config.trainer();
        base.kind = self.kind;
        if self.config.tune {
            GridSearch::new(base, self.config.seed).fit(data)
        } else {
            base.fit(data)
        }
    }
}

fn run_cv(config: &RunConfig, kind: ClassifierKind, data: &LabeledDataset) -> Result<(CvReport, CvSummary)> {
    config.validate()?;
    let plan = k_fold_split(data.labels(), config.k, config.seed, config.stratified)?;
    let report = cross_validate_plan(data, &FoldTrainer { config, kind }, plan, true)?;
    let trainer = {
        let mut t = config.trainer();
        t.kind = kind;
        t
    };
    let summary = CvSummary {
        classifier: kind,
        samples: data.len(),
        k: config.k,
        sigma: if config.tune { None } else { config.sigma },
        regularization: trainer.regularization(),
        overall_accuracy: report.overall_accuracy,
        mean_class_accuracy: report.mean_class_accuracy(),
        auc: report.auc,
    };
    Ok((report, summary))
}

pub fn cmd_crossval(config: &RunConfig, features: &Path, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    let (_, data) = load_features(features)?;
    let (report, summary) = run_cv(config, config.classifier, &data)?;
    let dir = prepare_run(out, "crossval", config, &[("features", features)])?;
    write_text(&dir.join("per_class.csv"), &per_class_csv(&report))?;
    write_text(&dir.join("confusion.csv"), &confusion_csv(&report))?;
    write_text(&dir.join("roc.csv"), &roc_csv(&report.roc))?;
    let label = config.classifier.to_string();
    write_text(&dir.join("roc.svg"), &roc_svg(&[(label.as_str(), &report.roc)]))?;
    write_toml(&dir.join("summary.toml"), &summary)?;
    Ok(dir)
}

/// Features for a manifest live in `features.csv` beside it, row for row.
fn manifest_features(manifest: &Path) -> Result<(Vec<ManifestEntry>, Vec<LabeledFeatures>)> {
    let entries = read_manifest(manifest)?;
    let features_path = manifest.parent().unwrap_or(Path::new(".")).join("features.csv");
    let rows = read_features_csv(&features_path)?;
    ensure!(
        rows.len() == entries.len(),
        "{} has {} rows but {} lists {}",
        features_path.display(),
        rows.len(),
        manifest.display(),
        entries.len()
    );
    for (i, (e, r)) in entries.iter().zip(&rows).enumerate() {
        ensure!(
            e.class == r.label,
            "{} row {}: class `{}` but features say `{}`",
            manifest.display(),
            i + 1,
            e.class,
            r.label
        );
    }
    Ok((entries, rows))
}

pub fn cmd_dualillum(config: &RunConfig, train_manifest: &Path, test_manifest: &Path, out: &Path) -> Result<PathBuf> {
    let (train_entries, train_rows) = manifest_features(train_manifest)?;
    let (test_entries, test_rows) = manifest_features(test_manifest)?;
    // Same file name and seed means the same rendered image.
    let train_keys: HashSet<(&str, u64)> = train_entries.iter().map(|e| (e.filename.as_str(), e.seed)).collect();
    if let Some(e) = test_entries.iter().find(|e| train_keys.contains(&(e.filename.as_str(), e.seed))) {
        bail!(
            "test image {} (seed {}) also appears in the training set",
            e.filename,
            e.seed
        );
    }
    let data = LabeledDataset::from_features(&train_rows)?;
    let trainer = resolve_trainer(config, config.classifier, &data)?;
    let model = train(&data, &trainer)?;
    let mut conditions: Vec<(String, usize, usize)> = Vec::new();
    for (e, r) in test_entries.iter().zip(&test_rows) {
        let ok = model.predict_name(r.features.as_slice())? == e.class;
        match conditions.iter_mut().find(|c| c.0 == e.illuminant) {
            Some(c) => {
                c.1 += 1;
                c.2 += usize::from(ok);
            }
            None => conditions.push((e.illuminant.clone(), 1, usize::from(ok))),
        }
    }
    let dir = prepare_run(
        out,
        "dualillum",
        config,
        &[("train_manifest", train_manifest), ("test_manifest", test_manifest)],
    )?;
    let mut csv = String::from("condition,samples,correct,accuracy\n");
    for (name, n, ok) in &conditions {
        let _ = writeln!(csv, "{name},{n},{ok},{:.4}", 100.0 * *ok as f64 / *n as f64);
    }
    write_text(&dir.join("dualillum.csv"), &csv)?;
    Ok(dir)
}

/// Held-out accuracy per (condition, class), in order of first appearance.
pub fn per_condition_csv(report: &CvReport, conditions: &[String]) -> String {
    let mut cells: Vec<(&str, usize, usize, usize)> = Vec::new();
    for (i, cond) in conditions.iter().enumerate() {
        let class = report.actual[i];
        let ok = usize::from(report.predicted[i] == class);
        match cells.iter_mut().find(|c| c.0 == cond && c.1 == class) {
            Some(c) => {
                c.2 += 1;
                c.3 += ok;
            }
            None => cells.push((cond, class, 1, ok)),
        }
    }
    let mut out = String::from("condition,class,samples,correct,accuracy\n");
    for (cond, class, n, ok) in cells {
        let _ = writeln!(
            out,
            "{cond},{},{n},{ok},{:.4}",
            report.class_names[class],
            100.0 * ok as f64 / n as f64
        );
    }
    out
}

#[derive(Serialize)]
struct ReportSummary {
    lssvm: CvSummary,
    svm: CvSummary,
}

/// Cross-validates both classifiers on the same folds.
pub fn cmd_report(config: &RunConfig, features: &Path, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    let (_, data) = load_features(features)?;
    let manifest = features.parent().unwrap_or(Path::new(".")).join("manifest.csv");
    let conditions = if manifest.is_file() {
        let (entries, _) = manifest_features(&manifest)?;
        Some(entries.into_iter().map(|e| e.illuminant).collect::<Vec<_>>())
    } else {
        None
    };
    let (ls, ls_summary) = run_cv(config, ClassifierKind::Lssvm, &data)?;
    let (sv, sv_summary) = run_cv(config, ClassifierKind::Svm, &data)?;
    let mut inputs = vec![("features", features)];
    if conditions.is_some() {
        inputs.push(("manifest", manifest.as_path()));
    }
    let dir = prepare_run(out, "report", config, &inputs)?;
    if let Some(conditions) = &conditions {
        for (name, r) in [("lssvm", &ls), ("svm", &sv)] {
            write_text(&dir.join(format!("per_condition_{name}.csv")), &per_condition_csv(r, conditions))?;
        }
    }
    for (name, r) in [("lssvm", &ls), ("svm", &sv)] {
        write_text(&dir.join(format!("per_class_{name}.csv")), &per_class_csv(r))?;
        write_text(&dir.join(format!("confusion_{name}.csv")), &confusion_csv(r))?;
        write_text(&dir.join(format!("roc_{name}.csv")), &roc_csv(&r.roc))?;
    }
    write_text(&dir.join("roc.svg"), &roc_svg(&[("lssvm", &ls.roc), ("svm", &sv.roc)]))?;
    let mut cmp = String::from("class,lssvm_accuracy,svm_accuracy\n");
    for (a, b) in ls.per_class.iter().zip(&sv.per_class) {
        let _ = writeln!(cmp, "{},{:.4},{:.4}", a.class, a.accuracy, b.accuracy);
    }
    let _ = writeln!(cmp, "overall,{:.4},{:.4}", ls.overall_accuracy, sv.overall_accuracy);
    let _ = writeln!(cmp, "auc,{:.6},{:.6}", ls.auc, sv.auc);
    write_text(&dir.join("comparison.csv"), &cmp)?;
    write_toml(
        &dir.join("summary.toml"),
        &ReportSummary {
            lssvm: ls_summary,
            svm: sv_summary,
        },
    )?;
    Ok(dir)
}
