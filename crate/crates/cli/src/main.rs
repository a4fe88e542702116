use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use chromaclass::synth::{ArchiveMode, Placement};
use chromaclass::{ClassifierKind, SourceFormat};
use chromaclass_cli::{
    cmd_crossval, cmd_dualillum, cmd_extract, cmd_predict, cmd_preprocess, cmd_report, cmd_synth, cmd_train,
    parse_corners, predictions_csv, PredictInput, RunConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chromaclass", version, about = "Colorimetric test-strip classification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Common {
    /// TOML config file (or a `run.toml` echo from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// lssvm or svm.
    #[arg(long, global = true)]
    classifier: Option<ClassifierKind>,
    /// Number of cross-validation folds.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(2..))]
    k: Option<u64>,
    /// RBF width; median pairwise distance when unset.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// LS-SVM regularization.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// SVM box constraint.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Select σ and γ/C by inner cross-validation.
    #[arg(long, global = true)]
    tune: bool,
    /// Standardize features before training.
    #[arg(long, global = true)]
    standardize: bool,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset.
    Synth {
        #[arg(long)]
        poses: Option<usize>,
        #[arg(long)]
        shots: Option<usize>,
        /// raw, rawc or jpeg.
        #[arg(long)]
        format: Option<SourceFormat>,
        /// fixed or random.
        #[arg(long, value_parser = parse_placement)]
        placement: Option<Placement>,
        /// none, scenes or strips.
        #[arg(long, value_parser = parse_archive)]
        images: Option<ArchiveMode>,
        /// Noise standard deviation for every condition.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Localize and inner-crop strips in scene images.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding the manifest's images.
        #[arg(long)]
        images: PathBuf,
    },
    /// Extract panel features from preprocessed strips.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        images: PathBuf,
    },
    /// Train a model on a features CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Classify a features CSV or a single image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "image", required_unless_present = "image")]
        features: Option<PathBuf>,
        #[arg(long)]
        image: Option<PathBuf>,
        /// Strip corners `x0,y0,x1,y1,x2,y2,x3,y3` for scene images.
        #[arg(long, requires = "image")]
        corners: Option<String>,
    },
    /// k-fold cross-validation of one classifier.
    Crossval {
        #[arg(long)]
        features: PathBuf,
    },
    /// Train on one manifest's conditions, test on another's.
    Dualillum {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Cross-validate both classifiers on the same folds.
    Report {
        #[arg(long)]
        features: PathBuf,
    },
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    match s {
        "fixed" => Ok(Placement::Fixed),
        "random" => Ok(Placement::Random),
        _ => Err(format!("unknown placement `{s}` (fixed, random)")),
    }
}

fn parse_archive(s: &str) -> Result<ArchiveMode, String> {
    match s {
        "none" => Ok(ArchiveMode::None),
        "scenes" => Ok(ArchiveMode::Scenes),
        "strips" => Ok(ArchiveMode::Strips),
        _ => Err(format!("unknown image mode `{s}` (none, scenes, strips)")),
    }
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.classifier {
        cfg.classifier = v;
    }
    if let Some(v) = common.k {
        cfg.k = v as usize;
    }
    if common.sigma.is_some() {
        cfg.sigma = common.sigma;
    }
    if let Some(v) = common.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = common.c {
        cfg.c = v;
    }
    cfg.tune |= common.tune;
    cfg.standardize |= common.standardize;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli.common)?;
    let out = &cli.common.out;
    let dir = match cli.command {
        Command::Synth {
            poses,
            shots,
            format,
            placement,
            images,
            noise,
        } => {
            let s = &mut cfg.synth;
            s.poses = poses.unwrap_or(s.poses);
            s.shots = shots.unwrap_or(s.shots);
            s.format = format.unwrap_or(s.format);
            s.placement = placement.unwrap_or(s.placement);
            s.images = images.unwrap_or(s.images);
            s.noise = noise.or(s.noise);
            cmd_synth(&cfg, out)?
        }
        Command::Preprocess { manifest, images } => cmd_preprocess(&cfg, &manifest, &images, out)?,
        Command::Extract { manifest, images } => cmd_extract(&cfg, &manifest, &images, out)?,
        Command::Train { features } => cmd_train(&cfg, &features, out)?,
        Command::Predict {
            model,
            features,
            image,
            corners,
        } => {
            let input = match (&features, &image) {
                (Some(f), _) => PredictInput::Features(f),
                (None, Some(path)) => PredictInput::Image {
                    path,
                    corners: corners.as_deref().map(parse_corners).transpose()?,
                },
                (None, None) => unreachable!("clap requires one input"),
            };
            let (_, rows) = cmd_predict(&cfg, &model, input, out)?;
            print!("{}", predictions_csv(&rows));
            return Ok(());
        }
        Command::Crossval { features } => cmd_crossval(&cfg, &features, out)?,
        Command::Dualillum { train, test } => cmd_dualillum(&cfg, &train, &test, out)?,
        Command::Report { features } => cmd_report(&cfg, &features, out)?,
    };
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
