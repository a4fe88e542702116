//! Mean-RGB panel features.
//!
//! A strip carries four test panels stacked along its long axis. Each panel
//! contributes the mean R, G and B over its interior, giving a 4 × 3 feature
//! matrix that is flattened panel-major into a 12-vector.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Rgb, StripImage, STRIP_COLS, STRIP_ROWS};

pub const PANELS: usize = 4;
pub const CHANNELS: usize = 3;
pub const FEATURE_DIM: usize = PANELS * CHANNELS;

/// Default inner margin applied to every side of each panel.
pub const DEFAULT_PANEL_MARGIN: f64 = 0.15;

/// Row ranges of the four panels plus the per-panel inner margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelLayout {
    panels: [Range<usize>; PANELS],
    margin: f64,
}

impl Default for PanelLayout {
    /// Four equal quarters of the long axis with a 15% inner margin.
    fn default() -> Self {
        PanelLayout::quarters(DEFAULT_PANEL_MARGIN).expect("default layout is valid")
    }
}

impl PanelLayout {
    pub fn new(panels: [Range<usize>; PANELS], margin: f64) -> Result<Self> {
        let layout = PanelLayout { panels, margin };
        layout.validate()?;
        Ok(layout)
    }

    pub fn quarters(margin: f64) -> Result<Self> {
        let q = STRIP_ROWS / PANELS;
        PanelLayout::new(std::array::from_fn(|i| i * q..(i + 1) * q), margin)
    }

    pub fn panels(&self) -> &[Range<usize>; PANELS] {
        &self.panels
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Interior window of panel `i` as `(rows, cols)`.
    pub fn panel_region(&self, i: usize) -> (Range<usize>, Range<usize>) {
        let rows = &self.panels[i];
        let row_trim = (rows.len() as f64 * self.margin).round() as usize;
        let col_trim = (STRIP_COLS as f64 * self.margin).round() as usize;
        (
            rows.start + row_trim..rows.end.saturating_sub(row_trim),
            col_trim..STRIP_COLS.saturating_sub(col_trim),
        )
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::InvalidLayout(format!(
                "panel margin {} outside [0, 0.5)",
                self.margin
            )));
        }
        for (i, r) in self.panels.iter().enumerate() {
            if r.end > STRIP_ROWS {
                return Err(Error::InvalidLayout(format!(
                    "panel {} rows {:?} exceed the {STRIP_ROWS}-row strip",
                    i + 1,
                    r
                )));
            }
            if i > 0 && r.start < self.panels[i - 1].end {
                return Err(Error::InvalidLayout(format!(
                    "panel {} overlaps or precedes panel {}",
                    i + 1,
                    i
                )));
            }
            let (rows, cols) = self.panel_region(i);
            if rows.is_empty() || cols.is_empty() {
                return Err(Error::InvalidLayout(format!(
                    "panel {} is empty after margin removal",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Entry `(i, j)` is the mean of channel `j` over panel `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix(pub [[f64; CHANNELS]; PANELS]);

/// Panel-major flattening of a [`FeatureMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureMatrix {
    pub fn flatten(&self) -> FeatureVector {
        FeatureVector(std::array::from_fn(|k| self.0[k / CHANNELS][k % CHANNELS]))
    }
}

impl FeatureVector {
    pub fn unflatten(&self) -> FeatureMatrix {
        FeatureMatrix(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i * CHANNELS + j])
        }))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_DIM] = values.try_into().map_err(|_| Error::DimensionMismatch {
            expected: FEATURE_DIM,
            actual: values.len(),
        })?;
        Ok(FeatureVector(arr))
    }
}

pub fn mean_rgb(strip: &StripImage, rows: Range<usize>, cols: Range<usize>) -> Result<Rgb> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidParameter("empty region".into()));
    }
    if rows.end > STRIP_ROWS || cols.end > STRIP_COLS {
        return Err(Error::InvalidParameter(format!(
            "region rows {rows:?} cols {cols:?} outside the strip"
        )));
    }
    // Offsets from the first pixel keep constant regions exact.
    let origin = strip.get(rows.start, cols.start);
    let mut sum = [0.0; 3];
    for r in rows.clone() {
        for c in cols.clone() {
            let p = strip.get(r, c);
            for k in 0..3 {
                sum[k] += p[k] - origin[k];
            }
        }
    }
    let n = (rows.len() * cols.len()) as f64;
    Ok(std::array::from_fn(|k| origin[k] + sum[k] / n))
}

pub fn extract_features(strip: &StripImage, layout: &PanelLayout) -> Result<(FeatureMatrix, FeatureVector)> {
    layout.validate()?;
    let mut matrix = [[0.0; CHANNELS]; PANELS];
    for (i, row) in matrix.iter_mut().enumerate() {
        let (rows, cols) = layout.panel_region(i);
        *row = mean_rgb(strip, rows, cols)?;
    }
    let matrix = FeatureMatrix(matrix);
    Ok((matrix, matrix.flatten()))
}

/// Header of the features CSV.
pub fn feature_csv_header() -> Vec<String> {
    let mut header = vec!["label".to_string()];
    for p in 1..=PANELS {
        for c in ["r", "g", "b"] {
            header.push(format!("p{p}_{c}"));
        }
    }
    header
}

/// One row of the features CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub label: String,
    pub features: FeatureVector,
}

pub fn write_features_csv(path: impl AsRef<Path>, rows: &[LabeledFeatures]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&feature_csv_header().join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.label);
        for v in row.features.as_slice() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledFeatures>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let expected = feature_csv_header();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(
            path,
            1,
            format!("header must be `{}`", expected.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != FEATURE_DIM + 1 {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "expected a label and {FEATURE_DIM} feature values, found {} values",
                    record.len().saturating_sub(1)
                ),
            ));
        }
        let label = record[0].trim().to_string();
        if label.is_empty() {
            return Err(Error::parse(path, line, "empty label"));
        }
        let mut values = [0.0; FEATURE_DIM];
        for (k, field) in record.iter().skip(1).enumerate() {
            values[k] = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{field}` is not a number")))?;
        }
        rows.push(LabeledFeatures {
            label,
            features: FeatureVector(values),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::SourceFormat;
    use proptest::prelude::*;

    fn four_panel_strip(colors: [Rgb; 4]) -> StripImage {
        let mut strip = StripImage::filled([0.0; 3], SourceFormat::Raw);
        for r in 0..STRIP_ROWS {
            for c in 0..STRIP_COLS {
                strip.set(r, c, colors[r / 175]);
            }
        }
        strip
    }

    #[test]
    fn mean_of_uniform_region() {
        let strip = StripImage::filled([0.25, 0.5, 0.75], SourceFormat::Raw);
        assert_eq!(mean_rgb(&strip, 10..20, 5..9).unwrap(), [0.25, 0.5, 0.75]);
    }

    #[test]
    fn mean_of_two_extremes() {
        let mut strip = StripImage::filled([0.0; 3], SourceFormat::Raw);
        strip.set(0, 1, [1.0; 3]);
        assert_eq!(mean_rgb(&strip, 0..1, 0..2).unwrap(), [0.5; 3]);
    }

    #[test]
    fn mean_of_half_split_red() {
        let mut strip = StripImage::filled([0.2, 0.0, 0.0], SourceFormat::Raw);
        for r in 0..10 {
            for c in 5..10 {
                strip.set(r, c, [0.4, 0.0, 0.0]);
            }
        }
        let m = mean_rgb(&strip, 0..10, 0..10).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_region_rejected() {
        let strip = StripImage::filled([0.0; 3], SourceFormat::Raw);
        assert!(mean_rgb(&strip, 5..5, 0..10).is_err());
        assert!(mean_rgb(&strip, 0..701, 0..10).is_err());
    }

    #[test]
    fn constant_panels_give_panel_major_vector() {
        let colors = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9], [0.15, 0.25, 0.35]];
        let strip = four_panel_strip(colors);
        let (m, v) = extract_features(&strip, &PanelLayout::default()).unwrap();
        assert_eq!(m.0, colors);
        let want: Vec<f64> = colors.iter().flatten().copied().collect();
        assert_eq!(v.as_slice(), want.as_slice());
    }

    #[test]
    fn black_strip_gives_zero_vector() {
        let strip = StripImage::filled([0.0; 3], SourceFormat::Raw);
        let (_, v) = extract_features(&strip, &PanelLayout::default()).unwrap();
        assert_eq!(v.0, [0.0; FEATURE_DIM]);
    }

    #[test]
    fn panel_margin_excludes_border_ring() {
        let layout = PanelLayout::default();
        let mut strip = StripImage::filled([0.5; 3], SourceFormat::Raw);
        // Bright ring two pixels wide around panel 2.
        let rows = layout.panels()[1].clone();
        for r in rows.clone() {
            for c in 0..STRIP_COLS {
                if r < rows.start + 2 || r >= rows.end - 2 || !(2..STRIP_COLS - 2).contains(&c) {
                    strip.set(r, c, [1.0; 3]);
                }
            }
        }
        let (m, _) = extract_features(&strip, &layout).unwrap();
        assert_eq!(m.0[1], [0.5; 3]);
    }

    #[test]
    fn invalid_layouts() {
        assert!(PanelLayout::new([0..100, 50..200, 200..300, 300..400], 0.1).is_err());
        assert!(PanelLayout::new([0..100, 100..200, 200..300, 300..800], 0.1).is_err());
        assert!(PanelLayout::new([0..2, 100..200, 200..300, 300..400], 0.4).is_err());
        assert!(PanelLayout::quarters(0.6).is_err());
    }

    #[test]
    fn csv_round_trip_and_bad_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![
            LabeledFeatures {
                label: "pH4.0".into(),
                features: FeatureVector(std::array::from_fn(|k| k as f64 / 13.0)),
            },
            LabeledFeatures {
                label: "pH5.0".into(),
                features: FeatureVector([0.1; FEATURE_DIM]),
            },
        ];
        write_features_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,p1_r,p1_g,p1_b,p2_r,"));
        assert_eq!(read_features_csv(&path).unwrap(), rows);

        let mut broken = text.lines().take(2).collect::<Vec<_>>().join("\n");
        broken.push_str("\npH6.0,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n");
        std::fs::write(&path, broken).unwrap();
        let err = read_features_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn flatten_is_a_bijection(values in proptest::array::uniform12(0.0f64..=1.0)) {
            let v = FeatureVector(values);
            prop_assert_eq!(v.unflatten().flatten(), v);
            let m = v.unflatten();
            for i in 0..PANELS {
                for j in 0..CHANNELS {
                    prop_assert_eq!(m.0[i][j], values[i * CHANNELS + j]);
                }
            }
        }

        #[test]
        fn panel_mean_is_order_free(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let layout = PanelLayout::default();
            let (rows, cols) = layout.panel_region(2);
            let mut strip = StripImage::filled([0.3; 3], SourceFormat::Raw);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut values: Vec<Rgb> = (0..rows.len() * cols.len())
                .map(|k| [(k % 7) as f64 / 8.0, (k % 3) as f64 / 4.0, (k % 11) as f64 / 16.0])
                .collect();
            let fill = |strip: &mut StripImage, vals: &[Rgb]| {
                let mut it = vals.iter();
                for r in rows.clone() {
                    for c in cols.clone() {
                        strip.set(r, c, *it.next().unwrap());
                    }
                }
            };
            fill(&mut strip, &values);
            let (_, before) = extract_features(&strip, &layout).unwrap();
            values.shuffle(&mut rng);
            fill(&mut strip, &values);
            let (_, after) = extract_features(&strip, &layout).unwrap();
            for k in 0..FEATURE_DIM {
                prop_assert!((before.0[k] - after.0[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn brightening_a_panel_shifts_its_means(delta in 0.0f64..0.3) {
            let layout = PanelLayout::default();
            let base = four_panel_strip([[0.1, 0.2, 0.3], [0.2, 0.3, 0.4], [0.3, 0.4, 0.5], [0.4, 0.5, 0.6]]);
            let mut bright = base.clone();
            for r in layout.panels()[0].clone() {
                for c in 0..STRIP_COLS {
                    bright.set(r, c, base.get(r, c).map(|v| v + delta));
                }
            }
            let (a, _) = extract_features(&base, &layout).unwrap();
            let (b, _) = extract_features(&bright, &layout).unwrap();
            for j in 0..CHANNELS {
                prop_assert!((b.0[0][j] - a.0[0][j] - delta).abs() < 1e-12);
            }
            prop_assert_eq!(a.0[1], b.0[1]);
        }
    }
}
