//! Deterministic file writers: CSV curves, JSON reports, SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use exterior_gs::curve::StabilityLabel;
use exterior_gs::MassCurve;
use serde::Serialize;

use crate::error::CliError;

pub const CURVE_HEADER: [&str; 8] = [
    "lambda",
    "d",
    "slope",
    "r_bar",
    "action",
    "nehari_res",
    "pohozaev_res",
    "stability_label",
];

/// 17 significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact value for file names: `1`, `0.25`, `3.3333333333`.
pub fn fmt_name(x: f64) -> String {
    format!("{x}")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// The curve as CSV with a header row and `\n` line endings.
pub fn curve_csv(curve: &MassCurve, labels: &[StabilityLabel]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(CURVE_HEADER).map_err(io)?;
    for (pt, label) in curve.points.iter().zip(labels) {
        w.write_record([
            fmt_num(pt.lambda),
            fmt_num(pt.d),
            fmt_num(pt.slope_hint),
            fmt_num(pt.r_bar),
            fmt_num(pt.action),
            fmt_num(pt.diagnostics.nehari_res),
            fmt_num(pt.diagnostics.pohozaev_full_res),
            label.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// Generic table writer sharing the curve CSV conventions.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Polyline of `(log10 λ, log10 d)` with axis ticks; the point with the
/// smallest `d` gets a marker when `mark_min` is set.
pub fn curve_svg(curve: &MassCurve, mark_min: Option<(f64, f64)>) -> String {
    let xs: Vec<f64> = curve.points.iter().map(|p| p.lambda.log10()).collect();
    let ys: Vec<f64> = curve.points.iter().map(|p| p.d.log10()).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line class="xtick" x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t}</text>"#,
            bottom + 5.0,
            bottom + 18.0
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line class="ytick" x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{t}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">log10 lambda</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">log10 d</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let pts: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#,
        pts.join(" ")
    );
    if let Some((lambda, d)) = mark_min {
        let _ = writeln!(
            s,
            r#"<circle class="minimum" cx="{:.2}" cy="{:.2}" r="4" fill="crimson"/>"#,
            sx(lambda.log10()),
            sy(d.log10())
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
        let x = 235.821_492_040_351_8;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn ticks_cover_the_range() {
        let t = nice_ticks(-3.0, 3.0);
        assert_eq!(t.first(), Some(&-3.0));
        assert_eq!(t.last(), Some(&3.0));
        assert!(nice_ticks(2.3, 2.9).len() >= 2);
    }

    #[test]
    fn table_uses_unix_newlines() {
        let s = table_csv(&["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(s, "a,b\n1,2\n");
    }
}
