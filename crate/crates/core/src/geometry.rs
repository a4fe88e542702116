//! Strip localization geometry: projective resampling of a quadrilateral
//! onto the canonical 700 × 100 raster, and inner re-cropping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageRgb, Rgb, SourceFormat, StripImage, STRIP_COLS, STRIP_ROWS};

/// Default fraction trimmed from every edge by [`inner_crop`].
pub const DEFAULT_INNER_MARGIN: f64 = 0.1;

/// Largest accepted inner-crop margin.
pub const MAX_INNER_MARGIN: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Strip corners in source pixel coordinates, ordered top-left, top-right,
/// bottom-right, bottom-left. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub corners: [Point; 4],
}

impl Quad {
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        let quad = Quad { corners };
        quad.validate()?;
        Ok(quad)
    }

    /// Axis-aligned rectangle with top-left corner `(x, y)`.
    pub fn rect(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        Quad::new([
            Point::new(x, y),
            Point::new(x + width, y),
            Point::new(x + width, y + height),
            Point::new(x, y + height),
        ])
    }

    /// Twice the signed area (shoelace).
    fn signed_area2(&self) -> f64 {
        let c = &self.corners;
        (0..4)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let c = &self.corners;
        if c.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidQuad("non-finite corner".into()));
        }
        let scale = c
            .iter()
            .flat_map(|p| [p.x.abs(), p.y.abs()])
            .fold(1.0_f64, f64::max);
        let eps = 1e-9 * scale * scale;
        let mut sign = 0.0;
        for i in 0..4 {
            let (prev, cur, next) = (c[(i + 3) % 4], c[i], c[(i + 1) % 4]);
            let cross = (cur.x - prev.x) * (next.y - cur.y) - (cur.y - prev.y) * (next.x - cur.x);
            if cross.abs() <= eps {
                return Err(Error::InvalidQuad(format!(
                    "corners {} , {} and {} are collinear",
                    (i + 3) % 4,
                    i,
                    (i + 1) % 4
                )));
            }
            if sign != 0.0 && cross.signum() != sign {
                return Err(Error::InvalidQuad("quad is not convex".into()));
            }
            sign = cross.signum();
        }
        if self.signed_area2().abs() <= eps {
            return Err(Error::InvalidQuad("enclosed area is zero".into()));
        }
        Ok(())
    }

    fn edge_lengths(&self) -> [f64; 4] {
        let c = &self.corners;
        [
            c[0].dist(c[1]),
            c[1].dist(c[2]),
            c[2].dist(c[3]),
            c[3].dist(c[0]),
        ]
    }

    /// Relabels the corners so that the top edge is the short one.
    fn long_axis_vertical(&self) -> Quad {
        let e = self.edge_lengths();
        let across = 0.5 * (e[0] + e[2]);
        let along = 0.5 * (e[1] + e[3]);
        if across > along {
            let c = self.corners;
            Quad {
                corners: [c[3], c[0], c[1], c[2]],
            }
        } else {
            *self
        }
    }
}

/// Projective map from the unit square onto a quad:
/// (0,0) → c0, (1,0) → c1, (1,1) → c2, (0,1) → c3.
#[derive(Debug, Clone, Copy)]
struct SquareToQuad {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    g: f64,
    h: f64,
}

impl SquareToQuad {
    fn new(quad: &Quad) -> Self {
        let [p0, p1, p2, p3] = quad.corners;
        let sx = p0.x - p1.x + p2.x - p3.x;
        let sy = p0.y - p1.y + p2.y - p3.y;
        let (g, h) = if sx == 0.0 && sy == 0.0 {
            (0.0, 0.0)
        } else {
            let (dx1, dx2) = (p1.x - p2.x, p3.x - p2.x);
            let (dy1, dy2) = (p1.y - p2.y, p3.y - p2.y);
            let den = dx1 * dy2 - dx2 * dy1;
            ((sx * dy2 - dx2 * sy) / den, (dx1 * sy - sx * dy1) / den)
        };
        SquareToQuad {
            a: p1.x - p0.x + g * p1.x,
            b: p3.x - p0.x + h * p3.x,
            c: p0.x,
            d: p1.y - p0.y + g * p1.y,
            e: p3.y - p0.y + h * p3.y,
            f: p0.y,
            g,
            h,
        }
    }

    #[inline]
    fn map(&self, u: f64, v: f64) -> (f64, f64) {
        let w = self.g * u + self.h * v + 1.0;
        (
            (self.a * u + self.b * v + self.c) / w,
            (self.d * u + self.e * v + self.f) / w,
        )
    }
}

/// Bilinear sample at continuous pixel-index coordinates (pixel centers at
/// integers), clamping to the border.
#[inline]
pub(crate) fn sample_bilinear(pixels: &[Rgb], width: usize, height: usize, x: f64, y: f64) -> Rgb {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = pixels[y0 * width + x0];
    let p10 = pixels[y0 * width + x1];
    let p01 = pixels[y1 * width + x0];
    let p11 = pixels[y1 * width + x1];
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] + fx * (p10[c] - p00[c]);
        let bottom = p01[c] + fx * (p11[c] - p01[c]);
        out[c] = top + fy * (bottom - top);
    }
    out
}

/// Resamples the quadrilateral region of `image` onto a 700 × 100 strip.
///
/// The longer pair of opposite edges always maps to the 700-row axis; when
/// the supplied top edge is the long one the corners are relabeled by one
/// quarter turn.
pub fn normalize_strip(image: &ImageRgb, corners: &Quad, source_format: SourceFormat) -> Result<StripImage> {
    corners.validate()?;
    let (w, h) = (image.width() as f64, image.height() as f64);
    for (i, p) in corners.corners.iter().enumerate() {
        if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
            return Err(Error::InvalidQuad(format!(
                "corner {i} ({}, {}) lies outside the {}x{} image",
                p.x, p.y, image.width(), image.height()
            )));
        }
    }
    let quad = corners.long_axis_vertical();
    let shortest = quad.edge_lengths().into_iter().fold(f64::INFINITY, f64::min);
    if shortest < 2.0 {
        return Err(Error::InvalidQuad(format!(
            "shortest side is {shortest:.3} px; at least 2 px required"
        )));
    }

    let map = SquareToQuad::new(&quad);
    let mut pixels = Vec::with_capacity(STRIP_ROWS * STRIP_COLS);
    for row in 0..STRIP_ROWS {
        let v = (row as f64 + 0.5) / STRIP_ROWS as f64;
        for col in 0..STRIP_COLS {
            let u = (col as f64 + 0.5) / STRIP_COLS as f64;
            let (x, y) = map.map(u, v);
            pixels.push(sample_bilinear(
                image.pixels(),
                image.width(),
                image.height(),
                x - 0.5,
                y - 0.5,
            ));
        }
    }
    StripImage::new(pixels, source_format)
}

/// Trims `margin_fraction` of the rows and columns from every edge and
/// rescales the remaining window back to 700 × 100.
pub fn inner_crop(strip: &StripImage, margin_fraction: f64) -> Result<StripImage> {
    if !(0.0..=MAX_INNER_MARGIN).contains(&margin_fraction) {
        return Err(Error::InvalidParameter(format!(
            "inner crop margin {margin_fraction} outside [0, {MAX_INNER_MARGIN}]"
        )));
    }
    let rows = STRIP_ROWS as f64;
    let cols = STRIP_COLS as f64;
    let (row_margin, col_margin) = (margin_fraction * rows, margin_fraction * cols);
    let row_scale = (rows - 2.0 * row_margin) / rows;
    let col_scale = (cols - 2.0 * col_margin) / cols;

    let mut pixels = Vec::with_capacity(STRIP_ROWS * STRIP_COLS);
    for row in 0..STRIP_ROWS {
        let y = row_margin + (row as f64 + 0.5) * row_scale - 0.5;
        for col in 0..STRIP_COLS {
            let x = col_margin + (col as f64 + 0.5) * col_scale - 0.5;
            pixels.push(sample_bilinear(strip.pixels(), STRIP_COLS, STRIP_ROWS, x, y));
        }
    }
    StripImage::new(pixels, strip.source_format())
}
