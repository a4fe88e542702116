//! White balance and color-correction matrices.
//!
//! The correction chain is `xyz_to_rgb · M · rgb`, where `M` is fitted by
//! least squares from device RGB to reference XYZ (D50) on a calibration
//! chart, and `xyz_to_rgb` is a fixed display matrix.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Encoding, ImageRgb, Rgb};

/// Linear sRGB (D50-adapted, Bradford) to CIE 1931 XYZ.
pub const SRGB_D50_TO_XYZ: [[f64; 3]; 3] = [
    [0.436_074_7, 0.385_064_9, 0.143_080_4],
    [0.222_504_5, 0.716_878_6, 0.060_616_9],
    [0.013_932_2, 0.097_104_5, 0.714_173_3],
];

/// CIE 1931 XYZ (D50) to linear sRGB, Bradford-adapted.
pub const XYZ_D50_TO_SRGB: [[f64; 3]; 3] = [
    [3.133_856_1, -1.616_866_7, -0.490_614_6],
    [-0.978_768_4, 1.916_141_5, 0.033_454_0],
    [0.071_945_3, -0.228_991_4, 1.405_242_7],
];

/// Row-major 3 × 3 color transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMatrix(pub [[f64; 3]; 3]);

impl ColorMatrix {
    pub const IDENTITY: ColorMatrix = ColorMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn xyz_d50_to_srgb() -> Self {
        ColorMatrix(XYZ_D50_TO_SRGB)
    }

    pub fn srgb_to_xyz_d50() -> Self {
        ColorMatrix(SRGB_D50_TO_XYZ)
    }

    pub fn scaled(s: f64) -> Self {
        ColorMatrix(Self::IDENTITY.0.map(|row| row.map(|v| v * s)))
    }

    fn to_na(self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.0[r][c])
    }

    fn from_na(m: &Matrix3<f64>) -> Self {
        ColorMatrix(std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])))
    }

    pub fn mul(&self, other: &ColorMatrix) -> ColorMatrix {
        Self::from_na(&(self.to_na() * other.to_na()))
    }

    #[inline]
    pub fn apply(&self, p: Rgb) -> Rgb {
        let m = &self.0;
        std::array::from_fn(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])
    }

    pub fn determinant(&self) -> f64 {
        self.to_na().determinant()
    }

    /// Reads three whitespace-separated rows of three reals. Blank lines and
    /// `#` comments are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows = parse_real_rows(path, &text, 3)?;
        if rows.len() != 3 {
            return Err(Error::parse(path, rows.len(), format!("expected 3 rows, found {}", rows.len())));
        }
        Ok(ColorMatrix(std::array::from_fn(|r| {
            std::array::from_fn(|c| rows[r].1[c])
        })))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text: String = self
            .0
            .iter()
            .map(|row| format!("{} {} {}\n", row[0], row[1], row[2]))
            .collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Measured device RGB and reference XYZ for each chart patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    measured_rgb: Vec<Rgb>,
    reference_xyz: Vec<[f64; 3]>,
}

impl CalibrationTarget {
    pub fn new(measured_rgb: Vec<Rgb>, reference_xyz: Vec<[f64; 3]>) -> Result<Self> {
        if measured_rgb.len() != reference_xyz.len() {
            return Err(Error::ColorCorrection(format!(
                "{} measured patches but {} reference patches",
                measured_rgb.len(),
                reference_xyz.len()
            )));
        }
        Ok(CalibrationTarget {
            measured_rgb,
            reference_xyz,
        })
    }

    pub fn len(&self) -> usize {
        self.measured_rgb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measured_rgb.is_empty()
    }

    pub fn measured_rgb(&self) -> &[Rgb] {
        &self.measured_rgb
    }

    pub fn reference_xyz(&self) -> &[[f64; 3]] {
        &self.reference_xyz
    }

    /// Sum of squared residuals `Σ ‖M·rgb − xyz‖²`.
    pub fn objective(&self, m: &ColorMatrix) -> f64 {
        self.measured_rgb
            .iter()
            .zip(&self.reference_xyz)
            .map(|(rgb, xyz)| {
                let p = m.apply(*rgb);
                (0..3).map(|c| (p[c] - xyz[c]).powi(2)).sum::<f64>()
            })
            .sum()
    }

    /// Reads rows of six reals `R G B X Y Z`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows = parse_real_rows(path, &text, 6)?;
        let (rgb, xyz) = rows
            .into_iter()
            .map(|(_, v)| ([v[0], v[1], v[2]], [v[3], v[4], v[5]]))
            .unzip();
        CalibrationTarget::new(rgb, xyz)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text: String = self
            .measured_rgb
            .iter()
            .zip(&self.reference_xyz)
            .map(|(a, b)| format!("{} {} {} {} {} {}\n", a[0], a[1], a[2], b[0], b[1], b[2]))
            .collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn parse_real_rows(path: &Path, text: &str, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {width} values, found {}", values.len()),
            ));
        }
        rows.push((i + 1, values));
    }
    Ok(rows)
}

/// Per-channel gains mapping `neutral_measured` onto the gray level
/// `neutral_target`.
pub fn white_balance_gains(neutral_measured: Rgb, neutral_target: f64) -> Result<[f64; 3]> {
    if !(neutral_target > 0.0 && neutral_target <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "neutral target {neutral_target} outside (0, 1]"
        )));
    }
    if let Some(c) = neutral_measured.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "neutral patch channel {c} is {} (must be > 0)",
            neutral_measured[c]
        )));
    }
    Ok(neutral_measured.map(|v| neutral_target / v))
}

pub fn white_balance(image: &ImageRgb, neutral_measured: Rgb, neutral_target: f64) -> Result<ImageRgb> {
    let gains = white_balance_gains(neutral_measured, neutral_target)?;
    Ok(image.map_pixels(|p| [p[0] * gains[0], p[1] * gains[1], p[2] * gains[2]]))
}

/// Ordinary least-squares fit of the 3 × 3 matrix taking measured RGB to
/// reference XYZ.
pub fn fit_color_matrix(target: &CalibrationTarget) -> Result<ColorMatrix> {
    let p = target.len();
    if p < 3 {
        return Err(Error::ColorCorrection(format!(
            "need at least 3 patches to fit a color matrix, got {p}"
        )));
    }
    // Rank check on the measured matrix via the Gram matrix spectrum.
    let mut ata = Matrix3::<f64>::zeros();
    for rgb in &target.measured_rgb {
        let a = Vector3::from(*rgb);
        ata += a * a.transpose();
    }
    let eig = ata.symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    if max_ev.is_nan() || max_ev <= 0.0 || min_ev <= max_ev * 1e-12 {
        return Err(Error::ColorCorrection(
            "measured patch matrix is rank deficient".into(),
        ));
    }
    // Least squares via QR of the P×3 measured matrix: A·Mᵀ ≈ B.
    let a = nalgebra::DMatrix::from_fn(p, 3, |i, j| target.measured_rgb[i][j]);
    let b = nalgebra::DMatrix::from_fn(p, 3, |i, j| target.reference_xyz[i][j]);
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::ColorCorrection("triangular solve failed".into()))?;
    // x is 3×3 with x = M^T.
    let m = Matrix3::from_fn(|i, j| x[(j, i)]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::ColorCorrection("non-finite fit".into()));
    }
    Ok(ColorMatrix::from_na(&m))
}

/// Maps every pixel through `xyz_to_rgb · m`, clamping to `[0, 1]`.
/// Only linear images are accepted.
pub fn apply_color_matrix(image: &ImageRgb, m: &ColorMatrix, xyz_to_rgb: &ColorMatrix) -> Result<ImageRgb> {
    if image.encoding() != Encoding::Linear {
        return Err(Error::ColorCorrection(
            "color correction requires linear input; display-referred data refused".into(),
        ));
    }
    let combined = xyz_to_rgb.mul(m);
    Ok(image.map_pixels(|p| combined.apply(p)))
}

/// sRGB transfer function (linear → display-referred).
pub fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patches(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rgb> {
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.02..1.0))).collect()
    }

    #[test]
    fn identity_fit() {
        let rgb = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.3, 0.5, 0.2]];
        let target = CalibrationTarget::new(rgb.clone(), rgb).unwrap();
        let m = fit_color_matrix(&target).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m.0[r][c] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn recovers_known_matrix_from_24_patches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m0 = ColorMatrix(std::array::from_fn(|r| {
            std::array::from_fn(|c| if r == c { 0.8 } else { 0.0 } + rng.random_range(-0.2..0.2))
        }));
        assert!(m0.determinant().abs() > 1e-3);
        let rgb = random_patches(&mut rng, 24);
        let xyz = rgb.iter().map(|p| m0.apply(*p)).collect();
        let fitted = fit_color_matrix(&CalibrationTarget::new(rgb, xyz).unwrap()).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((fitted.0[r][c] - m0.0[r][c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fit_is_a_least_squares_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rgb = random_patches(&mut rng, 24);
        let xyz: Vec<[f64; 3]> = rgb
            .iter()
            .map(|p| {
                let q = ColorMatrix::srgb_to_xyz_d50().apply(*p);
                q.map(|v| v + rng.random_range(-0.02..0.02))
            })
            .collect();
        let target = CalibrationTarget::new(rgb, xyz).unwrap();
        let m = fit_color_matrix(&target).unwrap();
        let base = target.objective(&m);
        for r in 0..3 {
            for c in 0..3 {
                for delta in [1e-3, -1e-3] {
                    let mut p = m;
                    p.0[r][c] += delta;
                    assert!(target.objective(&p) >= base);
                }
            }
        }
    }

    #[test]
    fn too_few_patches() {
        let t = CalibrationTarget::new(vec![[0.1; 3], [0.2, 0.3, 0.4]], vec![[0.1; 3], [0.2; 3]]).unwrap();
        assert!(matches!(fit_color_matrix(&t), Err(Error::ColorCorrection(_))));
    }

    #[test]
    fn identical_patches_are_rank_deficient() {
        let t = CalibrationTarget::new(vec![[0.3, 0.4, 0.5]; 6], vec![[0.2; 3]; 6]).unwrap();
        assert!(matches!(fit_color_matrix(&t), Err(Error::ColorCorrection(_))));
    }

    #[test]
    fn mismatched_target_lengths() {
        assert!(CalibrationTarget::new(vec![[0.1; 3]; 3], vec![[0.1; 3]; 4]).is_err());
    }

    #[test]
    fn white_balance_gain_arithmetic() {
        assert_eq!(white_balance_gains([0.5; 3], 0.5).unwrap(), [1.0; 3]);
        assert_eq!(white_balance_gains([0.5, 0.25, 0.1], 0.5).unwrap(), [1.0, 2.0, 5.0]);
        assert!(white_balance_gains([0.5, 0.0, 0.5], 0.5).is_err());
        assert!(white_balance_gains([0.5, -0.1, 0.5], 0.5).is_err());
        assert!(white_balance_gains([0.5; 3], 0.0).is_err());
    }

    #[test]
    fn white_balance_identity_and_idempotence() {
        let img = ImageRgb::new(
            2,
            1,
            vec![[0.4, 0.2, 0.05], [0.5, 0.25, 0.1]],
            Encoding::Linear,
        )
        .unwrap();
        assert_eq!(white_balance(&img, [0.5; 3], 0.5).unwrap(), img);

        let neutral = img.get(1, 0);
        let once = white_balance(&img, neutral, 0.5).unwrap();
        // Second pass measures the (now neutral) patch again.
        let twice = white_balance(&once, once.get(1, 0), 0.5).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.get(1, 0), [0.5; 3]);
    }

    #[test]
    fn apply_matrix_cases() {
        let img = ImageRgb::new(1, 1, vec![[0.2; 3]], Encoding::Linear).unwrap();
        let same = apply_color_matrix(&img, &ColorMatrix::IDENTITY, &ColorMatrix::IDENTITY).unwrap();
        assert_eq!(same, img);
        let doubled = apply_color_matrix(&img, &ColorMatrix::scaled(2.0), &ColorMatrix::IDENTITY).unwrap();
        assert_eq!(doubled.get(0, 0), [0.4; 3]);
        let bright = ImageRgb::new(1, 1, vec![[0.8; 3]], Encoding::Linear).unwrap();
        let clipped = apply_color_matrix(&bright, &ColorMatrix::scaled(2.0), &ColorMatrix::IDENTITY).unwrap();
        assert_eq!(clipped.get(0, 0), [1.0; 3]);
    }

    #[test]
    fn display_referred_input_refused() {
        let img = ImageRgb::new(1, 1, vec![[0.2; 3]], Encoding::DisplayReferred).unwrap();
        assert!(apply_color_matrix(&img, &ColorMatrix::IDENTITY, &ColorMatrix::IDENTITY).is_err());
    }

    #[test]
    fn display_matrices_are_inverse() {
        let p = ColorMatrix::xyz_d50_to_srgb().mul(&ColorMatrix::srgb_to_xyz_d50());
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((p.0[r][c] - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn matrix_and_target_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = ColorMatrix([[1.5, -0.25, 0.0], [0.1, 0.9, 0.0], [0.0, 0.05, 1.125]]);
        let path = dir.path().join("m.txt");
        m.save(&path).unwrap();
        assert_eq!(ColorMatrix::load(&path).unwrap(), m);

        let t = CalibrationTarget::new(vec![[0.1, 0.2, 0.3]; 3], vec![[0.4, 0.5, 0.6]; 3]).unwrap();
        let tpath = dir.path().join("t.txt");
        t.save(&tpath).unwrap();
        assert_eq!(CalibrationTarget::load(&tpath).unwrap(), t);

        std::fs::write(&tpath, "0.1 0.2 0.3 0.4 0.5\n").unwrap();
        let err = CalibrationTarget::load(&tpath).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }
}
