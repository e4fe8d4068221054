//! Minimal deterministic SVG line plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One or more `y` columns against an `x` column.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub ys: Vec<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: String,
}

impl PlotSpec {
    pub fn new(x: &str, ys: &[&str]) -> Self {
        PlotSpec { x: x.into(), ys: ys.iter().map(|s| s.to_string()).collect(), log_x: false, log_y: false, title: String::new() }
    }
}

/// Result of [`emit_plot`]: the SVG text and anything worth telling the user.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub svg: String,
    pub warnings: Vec<String>,
}

/// Reads `csv_path`, draws the requested columns and writes SVG to `out`.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec, out: &Path) -> Result<PlotOutput> {
    let text = std::fs::read_to_string(csv_path).map_err(|source| Error::Read { path: csv_path.to_path_buf(), source })?;
    let plot = render_plot(&text, spec)?;
    std::fs::write(out, &plot.svg)?;
    Ok(plot)
}

/// Renders CSV text to SVG. Rows whose cells are empty or non-numeric (or
/// non-positive on a log axis) are left out of that series.
pub fn render_plot(csv_text: &str, spec: &PlotSpec) -> Result<PlotOutput> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Config(format!("unreadable CSV: {e}")))?.clone();
    let mut warnings = Vec::new();
    if headers.is_empty() {
        warnings.push("CSV is empty; drawing empty axes".to_string());
    }
    let column = |name: &str| -> Result<Option<usize>> {
        match headers.iter().position(|h| h == name) {
            Some(i) => Ok(Some(i)),
            None if headers.is_empty() => Ok(None),
            None => Err(Error::Config(format!("CSV has no column `{name}`"))),
        }
    };
    let xi = column(&spec.x)?;
    let yis = spec.ys.iter().map(|y| column(y)).collect::<Result<Vec<_>>>()?;

    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.ys.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("unreadable CSV: {e}")))?;
        let Some(x) = xi.and_then(|i| record.get(i)).and_then(|s| s.parse::<f64>().ok()) else { continue };
        if !usable(x, spec.log_x) {
            continue;
        }
        for (s, yi) in series.iter_mut().zip(&yis) {
            if let Some(y) = yi.and_then(|i| record.get(i)).and_then(|s| s.parse::<f64>().ok()) {
                if usable(y, spec.log_y) {
                    s.push((x, y));
                }
            }
        }
    }
    for s in &mut series {
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    if series.iter().all(Vec::is_empty) && !headers.is_empty() {
        warnings.push("no plottable rows; drawing empty axes".to_string());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PlotOutput { svg: draw(spec, &series), warnings })
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values.map(t).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn tick_values(&self) -> Vec<f64> {
        (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).map(|v| if self.log { 10f64.powf(v) } else { v }).collect()
    }
}

fn draw(spec: &PlotSpec, series: &[Vec<(f64, f64)>]) -> String {
    let xa = Axis::fit(series.iter().flatten().map(|p| p.0), spec.log_x);
    let ya = Axis::fit(series.iter().flatten().map(|p| p.1), spec.log_y);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&spec.title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for v in xa.tick_values() {
        let x = px(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.3e}</text>"#, TOP + ph + 18.0);
    }
    for v in ya.tick_values() {
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3e}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&spec.x));
    for (i, (name, points)) in spec.ys.iter().zip(series).enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        if points.len() > 1 {
            let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, px(x), py(y));
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 22.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
