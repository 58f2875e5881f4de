//! Deterministic CSV, JSON and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use circle_renorm::decay::DecayReport;
use circle_renorm::numerics::Real;
use circle_renorm::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Significant digits printed for a value carried at `bits` of precision.
pub fn digits_for(bits: u32) -> usize {
    ((bits as f64 / 3.32) as usize).clamp(2, 40)
}

/// Decimal string with precision-tagged significant digits.
pub fn decimal<T: Real>(x: &T) -> String {
    x.to_decimal(digits_for(x.precision()))
}

/// Shortest round-trip form of an `f64`.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn significant_digits(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.trim_start_matches('0').len()
}

/// Rewrite floats with more than 15 significant digits, and non-finite
/// ones, as strings.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let s = float(x);
            if !x.is_finite() || significant_digits(&s) > 15 {
                Value::String(s)
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn to_json<S: Serialize>(s: &S) -> Result<Value> {
    Ok(normalize(serde_json::to_value(s)?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, s: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&to_json(s)?)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// CSV with a header row; every cell is already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn decay_rows(r: &DecayReport) -> Vec<Vec<String>> {
    r.values
        .iter()
        .map(|(n, v)| vec![n.to_string(), String::new(), float(*v)])
        .collect()
}

/// `{quantity: {C, lambda, residual}}` entry, `null` without a fit.
pub fn fit_summary(r: &DecayReport) -> Value {
    match &r.fit {
        Some(f) => serde_json::json!({
            "C": f.c,
            "lambda": f.lambda,
            "residual": f.residual,
            "used": f.used,
            "censored": f.censored,
        }),
        None => Value::Null,
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Standalone SVG of `log10 value` against the level, with the fitted line
/// `C λ^n` when a fit exists.
pub fn decay_plot_svg(report: &DecayReport) -> Result<String> {
    if report.values.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: nothing to plot", report.quantity)));
    }
    let pts: Vec<(f64, f64)> = report
        .values
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|(n, v)| (*n as f64, v.log10()))
        .collect();
    let censored = report.values.len() - pts.len();
    let n_lo = report.values.iter().map(|p| p.0).min().unwrap_or(0) as f64;
    let n_hi = (report.values.iter().map(|p| p.0).max().unwrap_or(0) as f64).max(n_lo + 1.0);
    let mut y_lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut y_hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(f) = &report.fit {
        for n in [n_lo, n_hi] {
            let y = f.c.log10() + n * f.lambda.log10();
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (-1.0, 0.0);
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);
    let sx = |n: f64| MARGIN + (n - n_lo) / (n_hi - n_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&report.quantity)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    for e in (y_lo as i64)..=(y_hi as i64) {
        let y = sy(e as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    for n in (n_lo as i64)..=(n_hi as i64) {
        let x = sx(n as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{n}</text>"#,
            y0 + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">level n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    if let Some(f) = &report.fit {
        let ya = f.c.log10() + n_lo * f.lambda.log10();
        let yb = f.c.log10() + n_hi * f.lambda.log10();
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-dasharray="6 4"/>"##,
            sx(n_lo),
            sy(ya),
            sx(n_hi),
            sy(yb)
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="44" text-anchor="end" fill="#c33">C = {:.4e}, λ = {:.4}, rms = {:.3e}</text>"##,
            x1,
            f.c,
            f.lambda,
            f.residual
        );
    }
    for (n, y) in &pts {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#236"/>"##,
            sx(*n),
            sy(*y)
        );
    }
    if censored > 0 {
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="44">{censored} level(s) at zero or below the precision floor not shown</text>"#
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_decay_plot(report: &DecayReport, path: &Path) -> Result<()> {
    let svg = decay_plot_svg(report)?;
    std::fs::write(path, svg).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use circle_renorm::AdaptiveReal;

    #[test]
    fn long_floats_become_strings() {
        let v = normalize(serde_json::json!({"a": 0.1, "b": [1.0 / 3.0, 2.5], "c": 7}));
        assert_eq!(v["a"], serde_json::json!(0.1));
        assert!(v["b"][0].is_string());
        assert_eq!(v["b"][1], serde_json::json!(2.5));
        assert_eq!(v["c"], serde_json::json!(7));
    }

    #[test]
    fn decimal_digits_follow_precision() {
        assert_eq!(digits_for(53), 15);
        assert_eq!(digits_for(512), 40);
        let third = AdaptiveReal::new(128, 1.0) / AdaptiveReal::new(128, 3.0);
        let s = decimal(&third);
        assert_eq!(digits_for(128), 38);
        assert_eq!(significant_digits(&s), 38, "{s}");
        assert!(s.starts_with("3.333"), "{s}");
    }

    #[test]
    fn geometric_plot_has_fit_line() {
        let r = DecayReport::new("geom", (1..=12).map(|n| (n, 2f64.powi(-(n as i32)))).collect(), 4, 0.0);
        let f = r.fit.as_ref().unwrap();
        assert!((f.lambda - 0.5).abs() < 1e-6);
        let svg = decay_plot_svg(&r).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("λ = 0.5000"));
        assert_eq!(svg.matches("<circle").count(), 12);
    }

    #[test]
    fn zero_sequence_has_note_and_no_fit() {
        let r = DecayReport::new("zero", (1..=6).map(|n| (n, 0.0)).collect(), 4, 1e-100);
        let svg = decay_plot_svg(&r).unwrap();
        assert!(!svg.contains("stroke-dasharray"));
        assert!(svg.contains("6 level(s) at zero"));
    }

    #[test]
    fn single_point_plots_without_fit() {
        let r = DecayReport::new("one", vec![(5, 0.25)], 4, 0.0);
        let svg = decay_plot_svg(&r).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("stroke-dasharray"));
        assert!(decay_plot_svg(&DecayReport::new("none", vec![], 4, 0.0)).is_err());
    }
}
