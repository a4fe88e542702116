//! Deterministic synthetic strip scenes.
//!
//! A strip carries four colored pads on a white backing. Illumination is a
//! per-channel gain, a linear brightness gradient along the long axis and
//! additive gaussian pixel noise. Scenes place the strip on a neutral gray
//! canvas at a seeded pose; [`generate_dataset`] pushes every scene through
//! the normal preprocessing and feature stages.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{
    apply_color_matrix, fit_color_matrix, srgb_encode, white_balance, CalibrationTarget, ColorMatrix,
    SRGB_D50_TO_XYZ,
};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, LabeledFeatures, PanelLayout, PANELS};
use crate::geometry::{inner_crop, normalize_strip, sample_bilinear, Point, Quad, DEFAULT_INNER_MARGIN};
use crate::image::{
    quantize_code, save_png, BitDepth, Encoding, ImageRgb, Rgb, SourceFormat, StripImage, STRIP_COLS, STRIP_ROWS,
};

/// Pads occupy `[PAD_START, PAD_END]` of the strip length, in equal parts.
const PAD_START: f64 = 0.1;
const PAD_END: f64 = 0.9;
/// Half-width of the raised-cosine blend between neighbouring pads, as a
/// fraction of strip length.
const PAD_BLEND: f64 = 0.02;
const BACKING: Rgb = [0.9, 0.9, 0.9];

/// Reflectance of the scene background.
pub const BACKGROUND_GRAY: f64 = 0.5;
/// Pixels beyond the strip outline that still take the strip's edge color,
/// so resampling near the outline never mixes in background.
pub const SCENE_BLEED: f64 = 2.0;
/// Clearance kept between randomly placed strips and the canvas border.
pub const POSE_MARGIN: f64 = 24.0;
/// Side of the square background patch at the canvas origin used for white
/// balance.
const NEUTRAL_PATCH: usize = 16;

pub const DEFAULT_NOISE: f64 = 0.01;
pub const DEFAULT_GRADIENT: f64 = 0.02;
pub const DEFAULT_CANVAS: usize = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteClass {
    pub name: String,
    pub panels: [Rgb; PANELS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPalette {
    classes: Vec<PaletteClass>,
}

/// Acid-end and base-end pad colors of the default palette.
const ACID_ANCHORS: [Rgb; PANELS] = [
    [0.85, 0.25, 0.20],
    [0.90, 0.60, 0.20],
    [0.80, 0.75, 0.30],
    [0.55, 0.30, 0.45],
];
const BASE_ANCHORS: [Rgb; PANELS] = [
    [0.20, 0.30, 0.70],
    [0.25, 0.55, 0.35],
    [0.45, 0.25, 0.55],
    [0.30, 0.65, 0.60],
];

impl ClassPalette {
    pub fn new(classes: Vec<PaletteClass>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "palette needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::InvalidParameter(format!("duplicate class `{}`", c.name)));
            }
            if c.panels.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "class `{}` has a pad color outside [0, 1]",
                    c.name
                )));
            }
        }
        Ok(ClassPalette { classes })
    }

    /// Classes `pH0.0` … `pH14.0`, interpolated linearly between fixed
    /// acid and base anchor colors.
    pub fn default_ph() -> Self {
        let classes = (0..15)
            .map(|i| {
                let t = i as f64 / 14.0;
                PaletteClass {
                    name: format!("pH{i}.0"),
                    panels: std::array::from_fn(|p| {
                        std::array::from_fn(|c| ACID_ANCHORS[p][c] + t * (BASE_ANCHORS[p][c] - ACID_ANCHORS[p][c]))
                    }),
                }
            })
            .collect();
        ClassPalette { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[PaletteClass] {
        &self.classes
    }

    pub fn names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn panels(&self, class: usize) -> Result<&[Rgb; PANELS]> {
        self.classes
            .get(class)
            .map(|c| &c.panels)
            .ok_or_else(|| Error::UnknownClass(format!("#{class}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminantProfile {
    pub name: String,
    pub gains: [f64; 3],
    /// Peak relative brightness change along the strip, in `[0, 0.3]`.
    pub gradient: f64,
    /// Standard deviation of additive per-pixel noise.
    pub noise: f64,
}

impl IlluminantProfile {
    pub fn new(name: impl Into<String>, gains: [f64; 3], gradient: f64, noise: f64) -> Result<Self> {
        let profile = IlluminantProfile {
            name: name.into(),
            gains,
            gradient,
            noise,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "illuminant `{}` gains must be positive and finite",
                self.name
            )));
        }
        if !(0.0..=0.3).contains(&self.gradient) {
            return Err(Error::InvalidParameter(format!(
                "illuminant `{}` gradient {} outside [0, 0.3]",
                self.name, self.gradient
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "illuminant `{}` noise must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    pub fn sunlight() -> Self {
        Self::builtin("sunlight", [1.0, 1.0, 1.0])
    }

    pub fn fluorescent() -> Self {
        Self::builtin("fluorescent", [0.95, 1.05, 1.10])
    }

    pub fn halogen() -> Self {
        Self::builtin("halogen", [1.15, 1.0, 0.80])
    }

    fn builtin(name: &str, gains: [f64; 3]) -> Self {
        IlluminantProfile {
            name: name.into(),
            gains,
            gradient: DEFAULT_GRADIENT,
            noise: DEFAULT_NOISE,
        }
    }

    /// Looks up `sunlight`, `fluorescent` or `halogen`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sunlight" => Ok(Self::sunlight()),
            "fluorescent" => Ok(Self::fluorescent()),
            "halogen" => Ok(Self::halogen()),
            other => Err(Error::InvalidParameter(format!("unknown illuminant `{other}`"))),
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_gradient(mut self, gradient: f64) -> Self {
        self.gradient = gradient;
        self
    }
}

/// Channel-wise `w·a + (1−w)·b`; gradient and noise mix the same way.
pub fn mix_illuminants(a: &IlluminantProfile, b: &IlluminantProfile, w: f64) -> Result<IlluminantProfile> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0, 1]")));
    }
    if w == 1.0 {
        return Ok(a.clone());
    }
    if w == 0.0 {
        return Ok(b.clone());
    }
    let lerp = |x: f64, y: f64| w * x + (1.0 - w) * y;
    let name = if w == 0.5 {
        format!("{}-{}", a.name, b.name)
    } else {
        format!("{}-{}@{w}", a.name, b.name)
    };
    Ok(IlluminantProfile {
        name,
        gains: std::array::from_fn(|c| lerp(a.gains[c], b.gains[c])),
        gradient: lerp(a.gradient, b.gradient),
        noise: lerp(a.noise, b.noise),
    })
}

/// Reflectance at relative position `u ∈ [0, 1]` along the strip.
fn strip_reflectance(panels: &[Rgb; PANELS], u: f64) -> Rgb {
    let step = (PAD_END - PAD_START) / PANELS as f64;
    let segment = |i: usize| -> Rgb {
        match i {
            0 => BACKING,
            i if i <= PANELS => panels[i - 1],
            _ => BACKING,
        }
    };
    for b in 0..=PANELS {
        let edge = PAD_START + b as f64 * step;
        if (u - edge).abs() < PAD_BLEND {
            let t = (u - edge + PAD_BLEND) / (2.0 * PAD_BLEND);
            let w = 0.5 - 0.5 * (std::f64::consts::PI * t).cos();
            let (l, r) = (segment(b), segment(b + 1));
            return std::array::from_fn(|c| l[c] + w * (r[c] - l[c]));
        }
    }
    let idx = if u < PAD_START {
        0
    } else {
        (((u - PAD_START) / step).floor() as usize + 1).min(PANELS + 1)
    };
    segment(idx)
}

/// Renders the canonical 700 × 100 strip of `class` under `illum`.
pub fn render_strip(class: usize, palette: &ClassPalette, illum: &IlluminantProfile, seed: u64) -> Result<StripImage> {
    let panels = palette.panels(class)?;
    illum.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slope: f64 = rng.random_range(-1.0..=1.0);
    let noise = if illum.noise > 0.0 {
        Some(Normal::new(0.0, illum.noise).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut pixels = Vec::with_capacity(STRIP_ROWS * STRIP_COLS);
    for r in 0..STRIP_ROWS {
        let u = (r as f64 + 0.5) / STRIP_ROWS as f64;
        let base = strip_reflectance(panels, u);
        let shade = 1.0 + illum.gradient * slope * (2.0 * u - 1.0);
        let lit: Rgb = std::array::from_fn(|c| base[c] * illum.gains[c] * shade);
        for _ in 0..STRIP_COLS {
            let mut p = lit;
            if let Some(n) = &noise {
                for v in &mut p {
                    *v += n.sample(&mut rng);
                }
            }
            pixels.push(p);
        }
    }
    StripImage::new(pixels, SourceFormat::Raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Strip center in canvas pixel coordinates.
    pub center: Point,
    /// Rotation of the strip's long axis from vertical, radians.
    pub angle: f64,
    pub illuminant: IlluminantProfile,
    pub seed: u64,
}

impl SceneSpec {
    /// Strip centered and upright.
    pub fn centered(canvas_width: usize, canvas_height: usize, illuminant: IlluminantProfile, seed: u64) -> Self {
        SceneSpec {
            canvas_width,
            canvas_height,
            center: Point::new(canvas_width as f64 / 2.0, canvas_height as f64 / 2.0),
            angle: 0.0,
            illuminant,
            seed,
        }
    }

    /// Uniform angle and a uniform center keeping the whole strip at least
    /// [`POSE_MARGIN`] from the border.
    pub fn random(
        canvas_width: usize,
        canvas_height: usize,
        illuminant: IlluminantProfile,
        pose_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let (hw, hh) = rotated_half_extent(angle);
        let (w, h) = (canvas_width as f64, canvas_height as f64);
        let (lo_x, hi_x) = (hw + POSE_MARGIN, w - hw - POSE_MARGIN);
        let (lo_y, hi_y) = (hh + POSE_MARGIN, h - hh - POSE_MARGIN);
        if lo_x > hi_x || lo_y > hi_y {
            return Err(Error::Scene(format!(
                "canvas {canvas_width}×{canvas_height} too small for a rotated strip"
            )));
        }
        let center = Point::new(rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y));
        Ok(SceneSpec {
            canvas_width,
            canvas_height,
            center,
            angle,
            illuminant,
            seed,
        })
    }

    /// Corners of the placed strip, top-left first.
    pub fn quad(&self) -> [Point; 4] {
        let (w, h) = (STRIP_COLS as f64, STRIP_ROWS as f64);
        [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)].map(|(x, y)| self.to_canvas(x, y))
    }

    fn to_canvas(&self, x: f64, y: f64) -> Point {
        let (dx, dy) = (x - STRIP_COLS as f64 / 2.0, y - STRIP_ROWS as f64 / 2.0);
        let (s, c) = self.angle.sin_cos();
        Point::new(self.center.x + c * dx - s * dy, self.center.y + s * dx + c * dy)
    }
}

fn rotated_half_extent(angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    let (hw, hh) = (STRIP_COLS as f64 / 2.0, STRIP_ROWS as f64 / 2.0);
    (c.abs() * hw + s.abs() * hh, s.abs() * hw + c.abs() * hh)
}

/// Renders the strip into a gray canvas. Returns the linear scene and the
/// ground-truth corners.
pub fn render_scene(spec: &SceneSpec, palette: &ClassPalette, class: usize) -> Result<(ImageRgb, Quad)> {
    let quad = checked_quad(spec)?;
    let strip = render_strip(class, palette, &spec.illuminant, spec.seed)?;
    let canvas = render_window(spec, &strip, [0, 0, spec.canvas_width, spec.canvas_height])?;
    Ok((canvas, quad))
}

fn checked_quad(spec: &SceneSpec) -> Result<Quad> {
    let corners = spec.quad();
    let (w, h) = (spec.canvas_width as f64, spec.canvas_height as f64);
    if corners
        .iter()
        .any(|p| p.x < SCENE_BLEED || p.y < SCENE_BLEED || p.x > w - SCENE_BLEED || p.y > h - SCENE_BLEED)
    {
        return Err(Error::Scene(format!(
            "strip at ({:.1}, {:.1}) would be clipped by the {}×{} canvas",
            spec.center.x, spec.center.y, spec.canvas_width, spec.canvas_height
        )));
    }
    Quad::new(corners)
}

fn background_color(illum: &IlluminantProfile) -> Rgb {
    crate::image::clamp_rgb(std::array::from_fn(|c| BACKGROUND_GRAY * illum.gains[c]))
}

/// Canvas window `[x0, x1) × [y0, y1)` around the strip, padded by `pad`.
fn strip_window(spec: &SceneSpec, pad: f64) -> [usize; 4] {
    let corners = spec.quad();
    let min_x = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - pad;
    let max_x = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + pad;
    let min_y = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - pad;
    let max_y = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + pad;
    [
        min_x.floor().max(0.0) as usize,
        min_y.floor().max(0.0) as usize,
        (max_x.ceil().max(0.0) as usize).min(spec.canvas_width),
        (max_y.ceil().max(0.0) as usize).min(spec.canvas_height),
    ]
}

/// Renders only the canvas window `[x0, y0, x1, y1)`.
fn render_window(spec: &SceneSpec, strip: &StripImage, window: [usize; 4]) -> Result<ImageRgb> {
    let [wx0, wy0, wx1, wy1] = window;
    let mut canvas = ImageRgb::filled(wx1 - wx0, wy1 - wy0, background_color(&spec.illuminant), Encoding::Linear)?;
    let [bx0, by0, bx1, by1] = strip_window(spec, SCENE_BLEED);
    let (sw, sh) = (STRIP_COLS as f64, STRIP_ROWS as f64);
    let (s, c) = spec.angle.sin_cos();
    for y in by0.max(wy0)..by1.min(wy1) {
        for x in bx0.max(wx0)..bx1.min(wx1) {
            let (dx, dy) = (x as f64 + 0.5 - spec.center.x, y as f64 + 0.5 - spec.center.y);
            let u = c * dx + s * dy + sw / 2.0;
            let v = -s * dx + c * dy + sh / 2.0;
            if u < -SCENE_BLEED || v < -SCENE_BLEED || u > sw + SCENE_BLEED || v > sh + SCENE_BLEED {
                continue;
            }
            let p = sample_bilinear(strip.pixels(), STRIP_COLS, STRIP_ROWS, u - 0.5, v - 0.5);
            canvas.set(x - wx0, y - wy0, p);
        }
    }
    Ok(canvas)
}

/// Derives an independent stream seed from a master seed and an index path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// How strips are placed in their scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Upright and centered, as in a fixed capture rig.
    Fixed,
    /// Seeded random angle and position per pose.
    Random,
}

/// Which rasters [`generate_dataset`] writes to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchiveMode {
    None,
    Scenes,
    /// Localized, inner-cropped 700 × 100 strips.
    Strips,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub palette: ClassPalette,
    /// Class names to render; all palette classes when empty.
    pub classes: Vec<String>,
    pub illuminants: Vec<IlluminantProfile>,
    pub poses: usize,
    pub shots: usize,
    pub placement: Placement,
    pub canvas: usize,
    pub format: SourceFormat,
    pub inner_margin: f64,
    pub panel_margin: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            palette: ClassPalette::default_ph(),
            classes: Vec::new(),
            illuminants: vec![IlluminantProfile::sunlight()],
            poses: 30,
            shots: 1,
            placement: Placement::Fixed,
            canvas: DEFAULT_CANVAS,
            format: SourceFormat::Raw,
            inner_margin: DEFAULT_INNER_MARGIN,
            panel_margin: crate::features::DEFAULT_PANEL_MARGIN,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    fn class_ids(&self) -> Result<Vec<usize>> {
        if self.classes.is_empty() {
            Ok((0..self.palette.len()).collect())
        } else {
            self.classes.iter().map(|c| self.palette.class_index(c)).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses == 0 || self.shots == 0 {
            return Err(Error::InvalidParameter(format!(
                "per-class count is zero ({} poses × {} shots)",
                self.poses, self.shots
            )));
        }
        if self.illuminants.is_empty() {
            return Err(Error::InvalidParameter("no illuminants configured".into()));
        }
        for (i, il) in self.illuminants.iter().enumerate() {
            il.validate()?;
            if self.illuminants[..i].iter().any(|o| o.name == il.name) {
                return Err(Error::InvalidParameter(format!("duplicate illuminant `{}`", il.name)));
            }
        }
        self.class_ids()?;
        Ok(())
    }

    /// Total number of images.
    pub fn image_count(&self) -> Result<usize> {
        Ok(self.class_ids()?.len() * self.illuminants.len() * self.poses * self.shots)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub filename: String,
    pub class: String,
    pub illuminant: String,
    pub pose: usize,
    pub shot: usize,
    pub seed: u64,
    pub corners: Quad,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub samples: Vec<Sample>,
}

impl GeneratedDataset {
    pub fn labeled_features(&self) -> Vec<LabeledFeatures> {
        self.samples
            .iter()
            .map(|s| LabeledFeatures {
                label: s.class.clone(),
                features: s.features,
            })
            .collect()
    }

    pub fn dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::from_features(&self.labeled_features())
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.samples
            .iter()
            .map(|s| ManifestEntry {
                filename: s.filename.clone(),
                class: s.class.clone(),
                illuminant: s.illuminant.clone(),
                pose: s.pose,
                shot: s.shot,
                seed: s.seed,
                corners: s.corners.corners,
            })
            .collect()
    }
}

/// One manifest row: an image and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub filename: String,
    pub class: String,
    pub illuminant: String,
    pub pose: usize,
    pub shot: usize,
    pub seed: u64,
    pub corners: [Point; 4],
}

const MANIFEST_HEADER: [&str; 14] = [
    "filename", "class", "illuminant", "pose", "shot", "seed", "x0", "y0", "x1", "y1", "x2", "y2", "x3", "y3",
];

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = MANIFEST_HEADER.join(",");
    out.push('\n');
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            e.filename, e.class, e.illuminant, e.pose, e.shot, e.seed
        ));
        for p in &e.corners {
            out.push_str(&format!(",{},{}", p.x, p.y));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.split(',').map(str::trim).eq(MANIFEST_HEADER) => {}
        _ => return Err(Error::parse(path, 1, "missing or unexpected manifest header")),
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != MANIFEST_HEADER.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} fields, found {}", MANIFEST_HEADER.len(), f.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::parse(path, line_no, format!("`{s}`: {e}")))
        };
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::parse(path, line_no, format!("`{s}`: {e}")))
        };
        let mut corners = [Point::new(0.0, 0.0); 4];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = Point::new(real(f[6 + 2 * k])?, real(f[7 + 2 * k])?);
        }
        entries.push(ManifestEntry {
            filename: f[0].to_string(),
            class: f[1].to_string(),
            illuminant: f[2].to_string(),
            pose: int(f[3])? as usize,
            shot: int(f[4])? as usize,
            seed: int(f[5])?,
            corners,
        });
    }
    Ok(entries)
}

/// Fixed linear-sRGB reflectances of the synthetic calibration chart.
fn chart_patches() -> Vec<Rgb> {
    let levels = [0.05, 0.35, 0.8];
    let mut patches = Vec::new();
    for &r in &levels {
        for &g in &levels {
            for &b in &levels {
                patches.push([r, g, b]);
            }
        }
    }
    patches
}

/// Color matrix fitted on the chart as photographed under `illum` and
/// white balanced with the same gains as the scene.
fn chart_matrix(illum: &IlluminantProfile, wb_gains: [f64; 3]) -> Result<ColorMatrix> {
    let patches = chart_patches();
    let measured = patches
        .iter()
        .map(|p| std::array::from_fn(|c| (p[c] * illum.gains[c]).clamp(0.0, 1.0) * wb_gains[c]))
        .collect();
    let xyz = ColorMatrix(SRGB_D50_TO_XYZ);
    let reference = patches.iter().map(|p| xyz.apply(*p)).collect();
    fit_color_matrix(&CalibrationTarget::new(measured, reference)?)
}

fn quantize(image: &ImageRgb, levels: f64) -> ImageRgb {
    image.map_pixels(|p| p.map(|v| quantize_code(v, levels) / levels))
}

/// Converts a linear scene into the stored form for `format`. Values are
/// quantized to the archive bit depth so features computed in memory match
/// features recomputed from saved files.
/// RAWc white balance uses the background patch at the canvas origin.
pub fn develop_scene(scene: &ImageRgb, format: SourceFormat, illum: &IlluminantProfile) -> Result<ImageRgb> {
    let neutral = scene.region_mean(0, 0, NEUTRAL_PATCH.min(scene.width()), NEUTRAL_PATCH.min(scene.height()))?;
    develop(scene, format, illum, neutral)
}

fn develop(scene: &ImageRgb, format: SourceFormat, illum: &IlluminantProfile, neutral: Rgb) -> Result<ImageRgb> {
    match format {
        SourceFormat::Raw => Ok(quantize(scene, 65535.0)),
        SourceFormat::Jpeg => {
            let encoded = scene.map_pixels(|p| p.map(srgb_encode));
            Ok(quantize(&encoded, 255.0).with_encoding(Encoding::DisplayReferred))
        }
        SourceFormat::Rawc => {
            let balanced = white_balance(scene, neutral, BACKGROUND_GRAY)?;
            let gains = crate::color::white_balance_gains(neutral, BACKGROUND_GRAY)?;
            let m = chart_matrix(illum, gains)?;
            let corrected = apply_color_matrix(&balanced, &m, &ColorMatrix::xyz_d50_to_srgb())?;
            Ok(quantize(&corrected, 65535.0))
        }
    }
}

pub fn archive_depth(format: SourceFormat) -> BitDepth {
    match format {
        SourceFormat::Jpeg => BitDepth::Eight,
        SourceFormat::Raw | SourceFormat::Rawc => BitDepth::Sixteen,
    }
}

/// Strip → inner crop → features, as used for every dataset image.
pub fn features_from_scene(
    scene: &ImageRgb,
    corners: &Quad,
    format: SourceFormat,
    inner_margin: f64,
    layout: &PanelLayout,
) -> Result<FeatureVector> {
    let strip = normalize_strip(scene, corners, format)?;
    let cropped = inner_crop(&strip, inner_margin)?;
    Ok(extract_features(&cropped, layout)?.1)
}

struct Job {
    class: usize,
    illum: usize,
    pose: usize,
    shot: usize,
}

/// Renders every (class, illuminant, pose, shot) scene and extracts its
/// features. With an archive directory, images are written there as PNG.
pub fn generate_dataset(config: &DatasetConfig, archive: Option<(&Path, ArchiveMode)>) -> Result<GeneratedDataset> {
    config.validate()?;
    let class_ids = config.class_ids()?;
    let layout = PanelLayout::quarters(config.panel_margin)?;
    let mut jobs = Vec::new();
    for &class in &class_ids {
        for illum in 0..config.illuminants.len() {
            for pose in 0..config.poses {
                for shot in 0..config.shots {
                    jobs.push(Job {
                        class,
                        illum,
                        pose,
                        shot,
                    });
                }
            }
        }
    }
    let archive = archive.filter(|(_, mode)| *mode != ArchiveMode::None);
    if let Some((dir, _)) = archive {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let samples = jobs
        .par_iter()
        .map(|job| {
            let illum = &config.illuminants[job.illum];
            let class_name = &config.palette.classes()[job.class].name;
            let pose_seed = derive_seed(config.seed, &[1, job.class as u64, job.pose as u64]);
            let seed = derive_seed(
                config.seed,
                &[2, job.class as u64, job.illum as u64, job.pose as u64, job.shot as u64],
            );
            let spec = match config.placement {
                Placement::Fixed => {
                    SceneSpec::centered(config.canvas, config.canvas, illum.clone(), seed)
                }
                Placement::Random => {
                    SceneSpec::random(config.canvas, config.canvas, illum.clone(), pose_seed, seed)?
                }
            };
            let corners = checked_quad(&spec)?;
            let strip = render_strip(job.class, &config.palette, illum, seed)?;
            // Without a scene archive only the neighbourhood of the strip is
            // ever sampled, so the rest of the canvas is skipped.
            let full = matches!(archive, Some((_, ArchiveMode::Scenes)));
            let window = if full {
                [0, 0, config.canvas, config.canvas]
            } else {
                strip_window(&spec, SCENE_BLEED + 2.0)
            };
            let scene = render_window(&spec, &strip, window)?;
            let developed = develop(&scene, config.format, illum, background_color(illum))?;
            let (ox, oy) = (window[0] as f64, window[1] as f64);
            let local = Quad::new(corners.corners.map(|p| Point::new(p.x - ox, p.y - oy)))?;
            let filename = format!(
                "{class_name}_{}_p{:03}_s{:02}.png",
                illum.name, job.pose, job.shot
            );
            let strip = normalize_strip(&developed, &local, config.format)?;
            let cropped = inner_crop(&strip, config.inner_margin)?;
            if let Some((dir, mode)) = archive {
                let path: PathBuf = dir.join(&filename);
                let depth = archive_depth(config.format);
                match mode {
                    ArchiveMode::Scenes => save_png(&developed, &path, depth)?,
                    ArchiveMode::Strips => save_png(&cropped.to_image(), &path, depth)?,
                    ArchiveMode::None => {}
                }
            }
            let features = extract_features(&cropped, &layout)?.1;
            // Archived strips are already localized and cropped.
            let corners = if matches!(archive, Some((_, ArchiveMode::Strips))) {
                Quad::rect(0.0, 0.0, STRIP_COLS as f64, STRIP_ROWS as f64)?
            } else {
                corners
            };
            Ok(Sample {
                filename,
                class: class_name.clone(),
                illuminant: illum.name.clone(),
                pose: job.pose,
                shot: job.shot,
                seed,
                corners,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedDataset { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DEFAULT_PANEL_MARGIN;

    fn quiet(profile: IlluminantProfile) -> IlluminantProfile {
        profile.with_noise(0.0).with_gradient(0.0)
    }

    fn panel_features(strip: &StripImage) -> FeatureVector {
        let cropped = inner_crop(strip, DEFAULT_INNER_MARGIN).unwrap();
        extract_features(&cropped, &PanelLayout::default()).unwrap().1
    }

    #[test]
    fn mixing_boundaries_and_midpoint() {
        let a = IlluminantProfile::new("a", [1.2, 1.0, 0.8], 0.1, 0.02).unwrap();
        let b = IlluminantProfile::new("b", [0.8, 1.0, 1.2], 0.0, 0.0).unwrap();
        assert_eq!(mix_illuminants(&a, &b, 1.0).unwrap(), a);
        assert_eq!(mix_illuminants(&a, &b, 0.0).unwrap(), b);
        let m = mix_illuminants(&a, &b, 0.5).unwrap();
        for g in m.gains {
            assert!((g - 1.0).abs() < 1e-15);
        }
        assert!((m.gradient - 0.05).abs() < 1e-15 && (m.noise - 0.01).abs() < 1e-15);
        assert!(mix_illuminants(&a, &b, 1.5).is_err());
        assert!(mix_illuminants(&a, &b, -0.1).is_err());
    }

    #[test]
    fn identity_rendering_reproduces_pad_colors() {
        let palette = ClassPalette::default_ph();
        let illum = quiet(IlluminantProfile::sunlight());
        for class in [0, 7, 14] {
            let strip = render_strip(class, &palette, &illum, 3).unwrap();
            let f = panel_features(&strip).0.to_vec();
            let expected: Vec<f64> = palette.panels(class).unwrap().iter().flatten().copied().collect();
            assert_eq!(f, expected);
        }
    }

    #[test]
    fn gains_scale_each_channel() {
        let palette = ClassPalette::default_ph();
        let gains = [0.9, 1.0, 1.1];
        let illum = IlluminantProfile::new("t", gains, 0.0, 0.0).unwrap();
        let strip = render_strip(4, &palette, &illum, 0).unwrap();
        let f = panel_features(&strip);
        for (p, base) in palette.panels(4).unwrap().iter().enumerate() {
            for c in 0..3 {
                assert!((f.0[p * 3 + c] - base[c] * gains[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strip_rendering_is_deterministic() {
        let palette = ClassPalette::default_ph();
        let illum = IlluminantProfile::halogen();
        let a = render_strip(2, &palette, &illum, 99).unwrap();
        let b = render_strip(2, &palette, &illum, 99).unwrap();
        assert!(a.pixels().iter().zip(b.pixels()).all(|(p, q)| p.map(f64::to_bits) == q.map(f64::to_bits)));
        let c = render_strip(2, &palette, &illum, 100).unwrap();
        assert_ne!(a, c);
        assert!(matches!(render_strip(15, &palette, &illum, 0), Err(Error::UnknownClass(_))));
    }

    #[test]
    fn upright_centered_scene_has_axis_aligned_quad() {
        let spec = SceneSpec::centered(300, 800, IlluminantProfile::sunlight(), 0);
        let (_, quad) = render_scene(&spec, &ClassPalette::default_ph(), 0).unwrap();
        assert_eq!(quad, Quad::rect(100.0, 50.0, 100.0, 700.0).unwrap());
    }

    fn rms(a: &StripImage, b: &StripImage) -> f64 {
        let sum: f64 = a
            .pixels()
            .iter()
            .zip(b.pixels())
            .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
            .sum();
        (sum / (3 * a.pixels().len()) as f64).sqrt()
    }

    #[test]
    fn quarter_turn_round_trip_is_exact() {
        let palette = ClassPalette::default_ph();
        let illum = IlluminantProfile::fluorescent().with_noise(0.0);
        let mut spec = SceneSpec::centered(800, 800, illum.clone(), 5);
        spec.angle = std::f64::consts::FRAC_PI_2;
        let (scene, quad) = render_scene(&spec, &palette, 9).unwrap();
        let back = normalize_strip(&scene, &quad, SourceFormat::Raw).unwrap();
        let truth = render_strip(9, &palette, &illum, 5).unwrap();
        assert!(rms(&back, &truth) < 1e-12, "rms {}", rms(&back, &truth));
    }

    #[test]
    fn rotation_round_trip_within_tolerance() {
        let palette = ClassPalette::default_ph();
        let illum = IlluminantProfile::halogen().with_noise(0.0);
        for k in 0..8 {
            let mut spec = SceneSpec::centered(800, 800, illum.clone(), k);
            spec.angle = k as f64 * std::f64::consts::PI / 4.0 + 0.3;
            let (scene, quad) = render_scene(&spec, &palette, 3).unwrap();
            let back = normalize_strip(&scene, &quad, SourceFormat::Raw).unwrap();
            let truth = render_strip(3, &palette, &illum, k).unwrap();
            assert!(rms(&back, &truth) < 1e-3, "angle {} rms {}", spec.angle, rms(&back, &truth));
        }
    }

    #[test]
    fn clipped_placement_rejected() {
        let mut spec = SceneSpec::centered(800, 800, IlluminantProfile::sunlight(), 0);
        spec.center = Point::new(10.0, 10.0);
        assert!(matches!(
            render_scene(&spec, &ClassPalette::default_ph(), 0),
            Err(Error::Scene(_))
        ));
    }

    #[test]
    fn random_poses_stay_inside() {
        for s in 0..50 {
            let spec = SceneSpec::random(800, 800, IlluminantProfile::sunlight(), s, s).unwrap();
            for p in spec.quad() {
                assert!(p.x >= POSE_MARGIN - 1e-9 && p.x <= 800.0 - POSE_MARGIN + 1e-9);
                assert!(p.y >= POSE_MARGIN - 1e-9 && p.y <= 800.0 - POSE_MARGIN + 1e-9);
            }
        }
    }

    #[test]
    fn mixture_features_lie_between_pure_ones() {
        let palette = ClassPalette::default_ph();
        let a = IlluminantProfile::fluorescent().with_noise(0.0);
        let b = IlluminantProfile::halogen().with_noise(0.0);
        let m = mix_illuminants(&a, &b, 0.5).unwrap();
        for class in 0..palette.len() {
            let f = |p: &IlluminantProfile| panel_features(&render_strip(class, &palette, p, 11).unwrap());
            let (fa, fb, fm) = (f(&a), f(&b), f(&m));
            for i in 0..12 {
                let (lo, hi) = (fa.0[i].min(fb.0[i]), fa.0[i].max(fb.0[i]));
                assert!(fm.0[i] >= lo - 1e-12 && fm.0[i] <= hi + 1e-12);
            }
        }
    }

    fn small_config() -> DatasetConfig {
        DatasetConfig {
            classes: vec!["pH3.0".into(), "pH4.0".into(), "pH5.0".into()],
            poses: 2,
            shots: 2,
            canvas: 760,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let cfg = DatasetConfig {
            illuminants: vec![IlluminantProfile::sunlight(), IlluminantProfile::halogen()],
            placement: Placement::Random,
            ..small_config()
        };
        let a = generate_dataset(&cfg, None).unwrap();
        assert_eq!(a.samples.len(), 3 * 2 * 2 * 2);
        assert_eq!(cfg.image_count().unwrap(), 24);
        let b = generate_dataset(&cfg, None).unwrap();
        assert_eq!(a, b);
        let ds = a.dataset().unwrap();
        assert_eq!(ds.class_names(), &["pH3.0", "pH4.0", "pH5.0"]);
    }

    #[test]
    fn zero_count_rejected() {
        let cfg = DatasetConfig {
            poses: 0,
            ..small_config()
        };
        assert!(generate_dataset(&cfg, None).is_err());
    }

    #[test]
    fn noiseless_features_separate_by_nearest_centroid() {
        let cfg = DatasetConfig {
            classes: Vec::new(),
            illuminants: vec![quiet(IlluminantProfile::sunlight())],
            poses: 1,
            shots: 1,
            ..small_config()
        };
        let data = generate_dataset(&cfg, None).unwrap();
        let palette = &cfg.palette;
        for s in &data.samples {
            let nearest = (0..palette.len())
                .min_by(|&i, &j| {
                    let d = |k: usize| {
                        let c: Vec<f64> = palette.panels(k).unwrap().iter().flatten().copied().collect();
                        crate::kernel::squared_distance(&c, &s.features.0)
                    };
                    d(i).total_cmp(&d(j))
                })
                .unwrap();
            assert_eq!(palette.classes()[nearest].name, s.class);
        }
    }

    #[test]
    fn archived_scenes_reproduce_features() {
        let dir = tempfile::tempdir().unwrap();
        for format in [SourceFormat::Raw, SourceFormat::Jpeg, SourceFormat::Rawc] {
            let cfg = DatasetConfig {
                format,
                placement: Placement::Random,
                poses: 1,
                shots: 1,
                illuminants: vec![IlluminantProfile::halogen()],
                ..small_config()
            };
            let sub = dir.path().join(format.to_string());
            let data = generate_dataset(&cfg, Some((&sub, ArchiveMode::Scenes))).unwrap();
            let manifest_path = sub.join("manifest.csv");
            write_manifest(&manifest_path, &data.manifest()).unwrap();
            let entries = read_manifest(&manifest_path).unwrap();
            assert_eq!(entries, data.manifest());
            for (e, s) in entries.iter().zip(&data.samples) {
                let img = crate::image::load_image(sub.join(&e.filename)).unwrap();
                let quad = Quad::new(e.corners).unwrap();
                let layout = PanelLayout::quarters(DEFAULT_PANEL_MARGIN).unwrap();
                let f = features_from_scene(&img, &quad, format, DEFAULT_INNER_MARGIN, &layout).unwrap();
                for (x, y) in f.0.iter().zip(&s.features.0) {
                    assert!((x - y).abs() < 1e-12, "{format}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn rawc_recovers_reflectance_under_any_illuminant() {
        let palette = ClassPalette::default_ph();
        let layout = PanelLayout::default();
        let mut feats = Vec::new();
        for illum in [IlluminantProfile::sunlight(), IlluminantProfile::halogen(), IlluminantProfile::fluorescent()] {
            let illum = quiet(illum);
            let spec = SceneSpec::centered(300, 760, illum.clone(), 1);
            let (scene, quad) = render_scene(&spec, &palette, 6).unwrap();
            let developed = develop_scene(&scene, SourceFormat::Rawc, &illum).unwrap();
            feats.push(features_from_scene(&developed, &quad, SourceFormat::Rawc, DEFAULT_INNER_MARGIN, &layout).unwrap());
        }
        let expected: Vec<f64> = palette.panels(6).unwrap().iter().flatten().copied().collect();
        for f in feats {
            for (x, y) in f.0.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-4, "{x} vs {y}");
            }
        }
    }
}
