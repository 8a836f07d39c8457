//! SVG convergence plots: median and inter-quartile band of the Amari index across seeds,
//! on a logarithmic y axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::output::RunRow;

/// Smallest value drawn on the log axis; exact zeros are clamped to it.
pub const LOG_FLOOR: f64 = 1e-6;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub sample_index: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmPlot {
    pub arm: String,
    pub points: Vec<BandPoint>,
    pub runs: usize,
    /// Axis extent in data units: `(x_min, x_max)` and `(y_min, y_max)` with y on decades.
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Groups rows by arm (in order of first appearance) and computes per-index quantiles.
pub fn arm_plots(rows: &[RunRow]) -> Vec<ArmPlot> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.arm.as_str()) {
            order.push(&r.arm);
        }
    }
    order
        .into_iter()
        .map(|arm| {
            let mut by_index: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut seeds: Vec<u64> = Vec::new();
            for r in rows.iter().filter(|r| r.arm == arm) {
                by_index.entry(r.sample_index).or_default().push(r.amari_index.max(LOG_FLOOR));
                if !seeds.contains(&r.seed) {
                    seeds.push(r.seed);
                }
            }
            let points: Vec<BandPoint> = by_index
                .into_iter()
                .map(|(sample_index, mut values)| {
                    values.sort_by(f64::total_cmp);
                    BandPoint {
                        sample_index,
                        q25: quantile(&values, 0.25),
                        median: quantile(&values, 0.5),
                        q75: quantile(&values, 0.75),
                    }
                })
                .collect();
            let (x_range, y_range) = axis_ranges(&points);
            ArmPlot { arm: arm.to_string(), points, runs: seeds.len(), x_range, y_range }
        })
        .collect()
}

fn axis_ranges(points: &[BandPoint]) -> ((f64, f64), (f64, f64)) {
    let x_max = points.last().map_or(1, |p| p.sample_index).max(1) as f64;
    let lo = points.iter().map(|p| p.q25).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.q75).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return ((0.0, x_max), (LOG_FLOOR, 1.0));
    }
    let mut dlo = lo.log10().floor();
    let mut dhi = hi.log10().ceil();
    if dhi <= dlo {
        dlo -= 1.0;
        dhi += 1.0;
    }
    ((0.0, x_max), (10f64.powf(dlo), 10f64.powf(dhi)))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(plot: &ArmPlot) -> String {
    let (x0, x1) = plot.x_range;
    let (ly0, ly1) = (plot.y_range.0.log10(), plot.y_range.1.log10());
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (ly1 - y.log10()) / (ly1 - ly0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} ({} runs): Amari index, median and IQR</text>"#,
        WIDTH / 2.0,
        escape(&plot.arm),
        plot.runs
    );

    // Decade grid and labels.
    let mut decade = ly0.round() as i32;
    while decade as f64 <= ly1 + 1e-9 {
        let y = sy(10f64.powi(decade));
        let _ = writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"#, LEFT - 6.0, y + 4.0);
        decade += 1;
    }
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let px = sx(x);
        let _ = writeln!(svg, r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/>"##, TOP + ph);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{x:.0}</text>"#, TOP + ph + 18.0);
    }
    let _ =
        writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sample index</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Amari index</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    if !plot.points.is_empty() {
        let mut band = String::new();
        for p in &plot.points {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.sample_index as f64), sy(p.q75));
        }
        for p in plot.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.sample_index as f64), sy(p.q25));
        }
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="#4a7ebb" fill-opacity="0.3" stroke="none"/>"##,
            band.trim_end()
        );

        let median: Vec<String> =
            plot.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.sample_index as f64), sy(p.median))).collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#1f4e8c" stroke-width="1.5"/>"##,
            median.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn file_name(arm: &str) -> String {
    let safe: String =
        arm.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("convergence_{safe}.svg")
}

/// Writes one SVG per arm into `dir`.
pub fn emit_plot(rows: &[RunRow], dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    arm_plots(rows)
        .iter()
        .map(|plot| {
            let path = dir.join(file_name(&plot.arm));
            std::fs::write(&path, render_svg(plot)).with_context(|| format!("writing {}", path.display()))?;
            Ok(path)
        })
        .collect()
}
