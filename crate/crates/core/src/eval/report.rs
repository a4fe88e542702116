//! CSV and SVG writers for evaluation results.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::cv::CvReport;
use crate::eval::roc::RocCurve;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

/// One row per class plus a trailing `overall` row.
pub fn per_class_csv(report: &CvReport) -> String {
    let mut out = String::from("class,samples,tp,tn,fp,fn,accuracy,sensitivity,specificity\n");
    for c in &report.per_class {
        let k = &c.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{},{}",
            c.class,
            c.samples,
            k.true_pos,
            k.true_neg,
            k.false_pos,
            k.false_neg,
            c.accuracy,
            fmt_opt(c.sensitivity),
            fmt_opt(c.specificity)
        );
    }
    let _ = writeln!(
        out,
        "overall,{},,,,,{:.4},,",
        report.actual.len(),
        report.overall_accuracy
    );
    out
}

pub fn confusion_csv(report: &CvReport) -> String {
    let mut out = String::from("actual\\predicted");
    for name in &report.class_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        out.push_str(name);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Header `fpr,tpr` followed by the curve points.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for &(x, y) in &curve.points {
        let _ = writeln!(out, "{x:.6},{y:.6}");
    }
    out
}

/// Reads back a file produced by [`roc_csv`].
pub fn read_roc_csv(path: impl AsRef<Path>) -> Result<RocCurve> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::parse(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, line, format!("`{s}`: {e}")))
        };
        points.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(RocCurve { points })
}

const SVG_SIZE: f64 = 400.0;
const SVG_PAD: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Plots one or more named curves on the unit square.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    let total = SVG_SIZE + 2.0 * SVG_PAD;
    let px = |x: f64| SVG_PAD + x * SVG_SIZE;
    let py = |y: f64| SVG_PAD + (1.0 - y) * SVG_SIZE;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{SVG_PAD}" y="{SVG_PAD}" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name} (AUC {:.4})</text>"#,
            px(0.55),
            py(0.1) + 16.0 * i as f64,
            curve.auc()
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">1 - specificity</text>"#,
        px(0.5),
        total - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">sensitivity</text>"#,
        py(0.5),
        py(0.5)
    );
    out.push_str("</svg>\n");
    out
}
