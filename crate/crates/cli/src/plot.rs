//! Minimal SVG charts. Output depends only on the input data, so identical
//! inputs give identical bytes.

use std::fmt::Write as _;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Scatter,
    Line,
    LogLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    /// Scatter and line styles may be mixed in one chart.
    pub kind: PlotKind,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>, color: &str, kind: PlotKind) -> Series {
        Series { label: label.into(), points, color: color.into(), kind }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.ceil() as i32, hi.floor() as i32);
        return (a..=b).map(f64::from).collect();
    }
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v as i32);
    }
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        Some((lo - 0.5, hi + 0.5))
    } else {
        let pad = 0.03 * (hi - lo);
        Some((lo - pad, hi + pad))
    }
}

/// Renders the chart; an empty chart or one without plottable points is a precondition error.
pub fn render_svg(chart: &Chart) -> Result<String, CliError> {
    let empty = |m: &str| CliError::Core(lorenz_stab::Error::Precondition(m.into()));
    if chart.series.is_empty() || chart.series.iter().all(|s| s.points.is_empty()) {
        return Err(empty("nothing to plot: empty series"));
    }
    let tf = |(x, y): (f64, f64)| -> Option<(f64, f64)> {
        if chart.log {
            (x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()).then(|| (x.log10(), y.log10()))
        } else {
            (x.is_finite() && y.is_finite()).then_some((x, y))
        }
    };
    let pts: Vec<Vec<(f64, f64)>> = chart.series.iter().map(|s| s.points.iter().filter_map(|p| tf(*p)).collect()).collect();
    let (x0, x1) = bounds(pts.iter().flatten().map(|p| p.0)).ok_or_else(|| empty("no finite points to plot"))?;
    let (y0, y1) = bounds(pts.iter().flatten().map(|p| p.1)).ok_or_else(|| empty("no finite points to plot"))?;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&chart.title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for t in ticks(x0, x1, chart.log) {
        let x = px(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP, H - BOTTOM);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, H - BOTTOM + 16.0, tick_label(t, chart.log));
    }
    for t in ticks(y0, y1, chart.log) {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, W - RIGHT);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(t, chart.log));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 10.0, escape(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(&chart.y_label)
    );
    for (series, p) in chart.series.iter().zip(&pts) {
        match series.kind {
            PlotKind::Scatter => {
                let _ = writeln!(s, r#"<g fill="{}">"#, series.color);
                for &(x, y) in p {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#, px(x), py(y));
                }
                s.push_str("</g>\n");
            }
            PlotKind::Line | PlotKind::LogLog => {
                let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#, series.color, coords.join(" "));
            }
        }
    }
    for (k, series) in chart.series.iter().enumerate().filter(|(_, s)| !s.label.is_empty()) {
        let y = TOP + 16.0 + 16.0 * k as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, series.color);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// A single-series chart in one call.
pub fn emit_plot(points: &[(f64, f64)], kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Result<String, CliError> {
    render_svg(&Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log: kind == PlotKind::LogLog,
        series: vec![Series::new("", points.to_vec(), "#1f4e9c", kind)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_rejected() {
        assert!(matches!(
            emit_plot(&[], PlotKind::Line, "t", "x", "y"),
            Err(CliError::Core(lorenz_stab::Error::Precondition(_)))
        ));
        assert!(emit_plot(&[(-1.0, 1.0)], PlotKind::LogLog, "t", "x", "y").is_err());
    }

    #[test]
    fn output_is_deterministic() {
        let p: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, (k as f64 * 0.1).sin())).collect();
        let a = emit_plot(&p, PlotKind::Scatter, "sine", "x", "y").unwrap();
        let b = emit_plot(&p, PlotKind::Scatter, "sine", "x", "y").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<circle").count(), 50);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn log_ticks_are_decades() {
        assert_eq!(ticks(-3.2, -0.9, true), vec![-3.0, -2.0, -1.0]);
        assert_eq!(tick_label(-2.0, true), "1e-2");
        assert_eq!(ticks(0.0, 1.0, false).len(), 6);
    }

    #[test]
    fn labels_are_escaped() {
        let s = emit_plot(&[(0.0, 0.0), (1.0, 1.0)], PlotKind::Line, "a<b", "x", "y").unwrap();
        assert!(s.contains("a&lt;b"));
    }
}
