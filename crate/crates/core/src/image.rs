//! RGB rasters and file I/O.
//!
//! Pixels are stored row-major as `[r, g, b]` triples of reals in `[0, 1]`.
//! 8-bit files are scaled by 1/255 and 16-bit files by 1/65535 on load.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Canonical strip raster height (long axis).
pub const STRIP_ROWS: usize = 700;
/// Canonical strip raster width (short axis).
pub const STRIP_COLS: usize = 100;

/// How the stored values relate to scene radiance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Tone-mapped output such as camera JPEGs.
    DisplayReferred,
    /// Proportional to radiance (decoded RAW data).
    Linear,
}

/// Provenance of a normalized strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Jpeg,
    Raw,
    Rawc,
}

impl SourceFormat {
    pub fn encoding(self) -> Encoding {
        match self {
            SourceFormat::Jpeg => Encoding::DisplayReferred,
            SourceFormat::Raw | SourceFormat::Rawc => Encoding::Linear,
        }
    }
}

impl std::fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceFormat::Jpeg => "jpeg",
            SourceFormat::Raw => "raw",
            SourceFormat::Rawc => "rawc",
        })
    }
}

impl std::str::FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jpeg" | "jpg" => Ok(SourceFormat::Jpeg),
            "raw" => Ok(SourceFormat::Raw),
            "rawc" => Ok(SourceFormat::Rawc),
            other => Err(Error::InvalidParameter(format!(
                "unknown source format `{other}` (expected jpeg, raw or rawc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
    encoding: Encoding,
}

impl ImageRgb {
    /// Builds an image from row-major pixels, clamping every channel to `[0, 1]`.
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>, encoding: Encoding) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        let pixels = pixels.into_iter().map(clamp_rgb).collect();
        Ok(ImageRgb {
            width,
            height,
            pixels,
            encoding,
        })
    }

    pub fn filled(width: usize, height: usize, value: Rgb, encoding: Encoding) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], encoding)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.pixels[y * self.width + x] = clamp_rgb(value);
    }

    /// Applies `f` to every pixel, clamping the result.
    pub fn map_pixels(&self, f: impl Fn(Rgb) -> Rgb) -> ImageRgb {
        ImageRgb {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| clamp_rgb(f(p))).collect(),
            encoding: self.encoding,
        }
    }

    /// Mean color over a rectangular window `[x0, x1) × [y0, y1)`.
    pub fn region_mean(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Rgb> {
        if x0 >= x1 || y0 >= y1 || x1 > self.width || y1 > self.height {
            return Err(Error::InvalidParameter(format!(
                "region [{x0},{x1})x[{y0},{y1}) empty or outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut sum = [0.0; 3];
        for y in y0..y1 {
            for p in &self.pixels[y * self.width + x0..y * self.width + x1] {
                for c in 0..3 {
                    sum[c] += p[c];
                }
            }
        }
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        Ok(sum.map(|s| s / n))
    }
}

/// A strip resampled to the canonical 700 × 100 raster (700 rows along the
/// strip's long axis).
#[derive(Debug, Clone, PartialEq)]
pub struct StripImage {
    pixels: Vec<Rgb>,
    source_format: SourceFormat,
}

impl StripImage {
    pub fn new(pixels: Vec<Rgb>, source_format: SourceFormat) -> Result<Self> {
        if pixels.len() != STRIP_ROWS * STRIP_COLS {
            return Err(Error::DimensionMismatch {
                expected: STRIP_ROWS * STRIP_COLS,
                actual: pixels.len(),
            });
        }
        Ok(StripImage {
            pixels: pixels.into_iter().map(clamp_rgb).collect(),
            source_format,
        })
    }

    pub fn filled(value: Rgb, source_format: SourceFormat) -> Self {
        StripImage {
            pixels: vec![clamp_rgb(value); STRIP_ROWS * STRIP_COLS],
            source_format,
        }
    }

    pub fn source_format(&self) -> SourceFormat {
        self.source_format
    }

    pub fn with_source_format(mut self, source_format: SourceFormat) -> Self {
        self.source_format = source_format;
        self
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * STRIP_COLS + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Rgb) {
        self.pixels[row * STRIP_COLS + col] = clamp_rgb(value);
    }

    /// Views the strip as a 100-wide, 700-tall image.
    pub fn to_image(&self) -> ImageRgb {
        ImageRgb {
            width: STRIP_COLS,
            height: STRIP_ROWS,
            pixels: self.pixels.clone(),
            encoding: self.source_format.encoding(),
        }
    }

    /// Interprets a 100 × 700 image as a strip.
    pub fn from_image(image: &ImageRgb, source_format: SourceFormat) -> Result<Self> {
        if image.width != STRIP_COLS || image.height != STRIP_ROWS {
            return Err(Error::InvalidParameter(format!(
                "strip images must be {STRIP_COLS}x{STRIP_ROWS}, got {}x{}",
                image.width, image.height
            )));
        }
        Self::new(image.pixels.clone(), source_format)
    }
}

/// Nearest integer code of `v ∈ [0, 1]` on a `0..=max` scale.
#[inline]
pub(crate) fn quantize_code(v: f64, max: f64) -> f64 {
    // Truncating cast instead of `round`, which is a libm call on baseline x86-64.
    (v.clamp(0.0, 1.0) * max + 0.5) as u32 as f64
}

pub(crate) fn clamp_rgb(p: Rgb) -> Rgb {
    p.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
}

/// Loads a PPM (P6) or PNG raster.
///
/// 16-bit rasters are tagged [`Encoding::Linear`] and 8-bit rasters
/// [`Encoding::DisplayReferred`]; callers can retag with
/// [`ImageRgb::with_encoding`].
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let image_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(image_err("unrecognized file signature".into()));
    }
    let decoded = reader.decode().map_err(|e| image_err(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    let sixteen_bit = matches!(
        decoded,
        DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let pixels: Vec<Rgb> = if sixteen_bit {
        decoded
            .to_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 65535.0))
            .collect()
    } else {
        decoded
            .to_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 255.0))
            .collect()
    };
    let encoding = if sixteen_bit {
        Encoding::Linear
    } else {
        Encoding::DisplayReferred
    };
    ImageRgb::new(width, height, pixels, encoding)
}

/// Bit depth for saved rasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Writes a PNG; values are rounded to the nearest code.
pub fn save_png(image: &ImageRgb, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = image::codecs::png::PngEncoder::new(BufWriter::new(file));
    let (w, h) = (image.width as u32, image.height as u32);
    let result = match depth {
        BitDepth::Eight => {
            let bytes: Vec<u8> = image
                .pixels
                .iter()
                .flat_map(|p| p.map(|v| quantize_code(v, 255.0) as u8))
                .collect();
            encoder.write_image(&bytes, w, h, image::ExtendedColorType::Rgb8)
        }
        BitDepth::Sixteen => {
            // The encoder takes native-endian samples and swaps as needed.
            let bytes: Vec<u8> = image
                .pixels
                .iter()
                .flat_map(|p| p.map(|v| quantize_code(v, 65535.0) as u16))
                .flat_map(u16::to_ne_bytes)
                .collect();
            encoder.write_image(&bytes, w, h, image::ExtendedColorType::Rgb16)
        }
    };
    result.map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a binary 8-bit PPM (P6).
pub fn save_ppm(image: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend(
        image
            .pixels
            .iter()
            .flat_map(|p| p.map(|v| quantize_code(v, 255.0) as u8)),
    );
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
