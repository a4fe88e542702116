//! Run configuration: TOML file, command-line overrides and the echo
//! written into every run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chromaclass::synth::{
    mix_illuminants, ArchiveMode, ClassPalette, DatasetConfig, IlluminantProfile, PaletteClass, Placement,
};
use chromaclass::{ClassifierKind, SourceFormat, TrainerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub classifier: ClassifierKind,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub gamma: f64,
    pub c: f64,
    pub standardize: bool,
    /// Select σ and γ/C by inner cross-validation.
    pub tune: bool,
    pub stratified: bool,
    pub inner_margin: f64,
    pub panel_margin: f64,
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            classifier: ClassifierKind::Lssvm,
            k: 10,
            sigma: None,
            gamma: chromaclass::lssvm::DEFAULT_GAMMA,
            c: chromaclass::svm::DEFAULT_C,
            standardize: false,
            tune: false,
            stratified: true,
            inner_margin: chromaclass::geometry::DEFAULT_INNER_MARGIN,
            panel_margin: chromaclass::features::DEFAULT_PANEL_MARGIN,
            synth: SynthSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    /// TOML file with `[[classes]]` tables (`name`, `panels`); the built-in
    /// 15-class palette when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub palette: Option<PathBuf>,
    pub classes: Vec<String>,
    pub illuminants: Vec<IlluminantSetting>,
    pub mixtures: Vec<MixtureSetting>,
    /// Overrides the noise of every condition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Overrides the gradient of every condition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<f64>,
    pub poses: usize,
    pub shots: usize,
    pub placement: Placement,
    pub format: SourceFormat,
    pub canvas: usize,
    pub images: ArchiveMode,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            palette: None,
            classes: Vec::new(),
            illuminants: vec![IlluminantSetting::named("sunlight")],
            mixtures: Vec::new(),
            noise: None,
            gradient: None,
            poses: 30,
            shots: 1,
            placement: Placement::Fixed,
            format: SourceFormat::Raw,
            canvas: chromaclass::synth::DEFAULT_CANVAS,
            images: ArchiveMode::None,
        }
    }
}

/// A pure illuminant: a built-in name, or explicit gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminantSetting {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

impl IlluminantSetting {
    pub fn named(name: &str) -> Self {
        IlluminantSetting {
            name: name.into(),
            gains: None,
            gradient: None,
            noise: None,
        }
    }

    fn profile(&self) -> Result<IlluminantProfile> {
        let mut p = match self.gains {
            Some(g) => IlluminantProfile::new(
                self.name.clone(),
                g,
                chromaclass::synth::DEFAULT_GRADIENT,
                chromaclass::synth::DEFAULT_NOISE,
            )?,
            None => IlluminantProfile::by_name(&self.name)?,
        };
        if let Some(g) = self.gradient {
            p.gradient = g;
        }
        if let Some(n) = self.noise {
            p.noise = n;
        }
        p.validate()?;
        Ok(p)
    }
}

/// `w·a + (1−w)·b`; names resolve against the configured illuminants
/// first, then the built-ins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSetting {
    pub a: String,
    pub b: String,
    pub w: f64,
}

#[derive(Deserialize)]
struct PaletteFile {
    classes: Vec<PaletteClass>,
}

pub fn load_palette(path: &Path) -> Result<ClassPalette> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading palette {}", path.display()))?;
    let file: PaletteFile = toml::from_str(&text).with_context(|| format!("parsing palette {}", path.display()))?;
    ClassPalette::new(file.classes).with_context(|| format!("palette {}", path.display()))
}

impl RunConfig {
    /// Reads a config file. A run echo (`run.toml`) is accepted as well;
    /// its `[config]` table is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let table = match value.get("config") {
            Some(toml::Value::Table(t)) if value.contains_key("command") => t.clone(),
            _ => value,
        };
        table
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            bail!("k must be at least 2 (got {})", self.k);
        }
        Ok(())
    }

    pub fn trainer(&self) -> TrainerConfig {
        TrainerConfig {
            kind: self.classifier,
            sigma: self.sigma,
            gamma: self.gamma,
            c: self.c,
            standardize: self.standardize,
        }
    }

    pub fn dataset_config(&self) -> Result<DatasetConfig> {
        let s = &self.synth;
        let palette = match &s.palette {
            Some(p) => load_palette(p)?,
            None => ClassPalette::default_ph(),
        };
        let pure: Vec<IlluminantProfile> = s
            .illuminants
            .iter()
            .map(IlluminantSetting::profile)
            .collect::<Result<_>>()?;
        let resolve = |name: &str| -> Result<IlluminantProfile> {
            match pure.iter().find(|p| p.name == name) {
                Some(p) => Ok(p.clone()),
                None => Ok(IlluminantProfile::by_name(name)?),
            }
        };
        let mut conditions = pure.clone();
        for m in &s.mixtures {
            conditions.push(mix_illuminants(&resolve(&m.a)?, &resolve(&m.b)?, m.w)?);
        }
        for c in &mut conditions {
            if let Some(n) = s.noise {
                c.noise = n;
            }
            if let Some(g) = s.gradient {
                c.gradient = g;
            }
        }
        Ok(DatasetConfig {
            palette,
            classes: s.classes.clone(),
            illuminants: conditions,
            poses: s.poses,
            shots: s.shots,
            placement: s.placement,
            canvas: s.canvas,
            format: s.format,
            inner_margin: self.inner_margin,
            panel_margin: self.panel_margin,
            seed: self.seed,
        })
    }
}

/// Written as `run.toml` into every run directory. Loading it with
/// `--config` reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEcho {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub input_sha256: BTreeMap<String, String>,
    pub config: RunConfig,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunEcho {
    pub fn new(command: &str, config: &RunConfig, inputs: &[(&str, &Path)]) -> Result<Self> {
        let mut paths = BTreeMap::new();
        let mut digests = BTreeMap::new();
        for (name, path) in inputs {
            paths.insert(name.to_string(), path.display().to_string());
            digests.insert(name.to_string(), sha256_file(path)?);
        }
        Ok(RunEcho {
            command: command.into(),
            inputs: paths,
            input_sha256: digests,
            config: config.clone(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// `run-<hash8>-s<seed>`. The hash covers the command, the resolved
    /// config and input contents, not input paths.
    pub fn dir_name(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        h.update(toml::to_string(&self.config)?.as_bytes());
        for (name, digest) in &self.input_sha256 {
            h.update(format!("{name}={digest}\n").as_bytes());
        }
        let hash = hex::encode(h.finalize());
        Ok(format!("run-{}-s{}", &hash[..8], self.config.seed))
    }
}
