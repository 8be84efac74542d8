use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::concentration::ConcentrationRow;
use super::scan::ScanTable;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        } else if hi - lo < 1e-12 * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| from + (v - self.lo) / (self.hi - self.lo) * (to - from))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..5)
            .map(|k| {
                let t = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
                let label = if self.log { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
                (t, label)
            })
            .collect()
    }
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        W / 2.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 10.0,
        esc(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {y})\">{}</text>",
        esc(ylabel),
        y = TOP + (H - TOP - BOTTOM) / 2.0
    );
}

fn ticks(out: &mut String, xa: &Axis, ya: &Axis) {
    for (t, label) in xa.ticks() {
        let x = LEFT + (t - xa.lo) / (xa.hi - xa.lo) * (W - LEFT - RIGHT);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{b}\" x2=\"{x:.2}\" y2=\"{b2}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{ty}\" text-anchor=\"middle\">{label}</text>",
            b = H - BOTTOM,
            b2 = H - BOTTOM + 5.0,
            ty = H - BOTTOM + 18.0
        );
    }
    for (t, label) in ya.ticks() {
        let y = H - BOTTOM - (t - ya.lo) / (ya.hi - ya.lo) * (H - TOP - BOTTOM);
        let _ = writeln!(
            out,
            "<line x1=\"{l2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{tx}\" y=\"{ty:.2}\" text-anchor=\"end\">{label}</text>",
            l2 = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0
        );
    }
}

/// Line chart; non-finite or non-positive (on log axes) points are skipped.
pub fn render_chart(chart: &Chart) -> String {
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
    let pts = || {
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| usable(*x, chart.log_x) && usable(*y, chart.log_y))
    };
    let xa = Axis::fit(pts().map(|p| p.0), chart.log_x);
    let ya = Axis::fit(pts().map(|p| p.1), chart.log_y);
    let mut out = String::new();
    frame(&mut out, &chart.title, &chart.xlabel, &chart.ylabel);
    ticks(&mut out, &xa, &ya);
    for (k, s) in chart.series.iter().enumerate() {
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| usable(*x, chart.log_x) && usable(*y, chart.log_y))
            .filter_map(|&(x, y)| {
                let px = xa.map(x, LEFT, W - RIGHT)?;
                let py = ya.map(y, H - BOTTOM, TOP)?;
                Some(format!("{px:.2},{py:.2}"))
            })
            .collect();
        if coords.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            W - RIGHT - 150.0,
            TOP + 16.0 + 15.0 * k as f64,
            esc(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `values[i][j]` over `xs × ys`.
pub fn render_heatmap(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], values: &[Vec<f64>]) -> String {
    let xa = Axis::fit(xs.iter().copied(), false);
    let ya = Axis::fit(ys.iter().copied(), false);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel);
    ticks(&mut out, &xa, &ya);
    let flat = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = flat.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let cw = (W - LEFT - RIGHT) / xs.len().max(1) as f64;
    let ch = (H - TOP - BOTTOM) / ys.len().max(1) as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                let r = (255.0 * t).round() as u8;
                let b = (255.0 * (1.0 - t)).round() as u8;
                format!("#{r:02x}40{b:02x}")
            } else {
                "#cccccc".into()
            };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{fill}\"/>",
                LEFT + i as f64 * cw,
                H - BOTTOM - (j + 1) as f64 * ch
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `J̃` against the first scanned coordinate, one pair of curves per `ε`.
pub fn j_tilde_chart(scan: &ScanTable) -> Chart {
    let axis = scan
        .rows
        .first()
        .map(|r0| {
            (0..3)
                .find(|&a| scan.rows.iter().any(|r| r.x()[a] != r0.x()[a] && r.eps == r0.eps))
                .unwrap_or(0)
        })
        .unwrap_or(0);
    let mut series = Vec::new();
    for eps in scan.eps_values() {
        let rows: Vec<_> = scan.at_eps(eps).filter_map(|r| r.sample.as_ref().map(|s| (r.x()[axis], s))).collect();
        series.push(Series {
            label: format!("J~ eps = {eps}"),
            points: rows.iter().map(|(x, s)| (*x, s.j_tilde)).collect(),
            dashed: false,
        });
        series.push(Series {
            label: format!("leading eps = {eps}"),
            points: rows.iter().map(|(x, s)| (*x, s.leading)).collect(),
            dashed: true,
        });
    }
    Chart {
        title: "Reduced functional".into(),
        xlabel: format!("x{}", axis + 1),
        ylabel: "J~".into(),
        log_x: false,
        log_y: false,
        series,
    }
}

/// Largest expansion and gradient errors over the scan at each `ε`.
pub fn expansion_chart(scan: &ScanTable) -> Chart {
    let mut value = Vec::new();
    let mut gradient = Vec::new();
    for eps in scan.eps_values() {
        let samples: Vec<_> = scan.at_eps(eps).filter_map(|r| r.sample.as_ref()).collect();
        if samples.is_empty() {
            continue;
        }
        value.push((eps, samples.iter().map(|s| s.expansion_error).fold(0.0, f64::max)));
        gradient.push((eps, samples.iter().map(|s| s.gradient_error()).fold(0.0, f64::max)));
    }
    Chart {
        title: "Expansion error".into(),
        xlabel: "eps".into(),
        ylabel: "error".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "value".into(),
                points: value,
                dashed: false,
            },
            Series {
                label: "gradient".into(),
                points: gradient,
                dashed: true,
            },
        ],
    }
}

pub fn concentration_chart(rows: &[ConcentrationRow]) -> Chart {
    Chart {
        title: "Concentration".into(),
        xlabel: "eps".into(),
        ylabel: "distance".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "H1 distance".into(),
            points: rows.iter().map(|r| (r.eps, r.distance)).collect(),
            dashed: false,
        }],
    }
}

/// Heatmap of `J̃` at the smallest `ε` when the scan covers two axes.
fn heatmap_of(scan: &ScanTable) -> Option<String> {
    let eps = *scan.eps_values().last()?;
    let rows: Vec<_> = scan.at_eps(eps).collect();
    let distinct = |a: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r.x()[a]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let coords = [distinct(0), distinct(1), distinct(2)];
    let axes: Vec<usize> = (0..3).filter(|&a| coords[a].len() > 1).collect();
    if axes.len() < 2 {
        return None;
    }
    let (a, b) = (axes[0], axes[1]);
    let mut values = vec![vec![f64::NAN; coords[b].len()]; coords[a].len()];
    let rest: Vec<usize> = (0..3).filter(|&c| c != a && c != b).collect();
    for r in &rows {
        let x = r.x();
        if rest.iter().any(|&c| x[c] != coords[c][0]) {
            continue;
        }
        let i = coords[a].iter().position(|&v| v == x[a])?;
        let j = coords[b].iter().position(|&v| v == x[b])?;
        values[i][j] = r.sample.as_ref().map(|s| s.j_tilde).unwrap_or(f64::NAN);
    }
    Some(render_heatmap(
        &format!("J~ at eps = {eps}"),
        &format!("x{}", a + 1),
        &format!("x{}", b + 1),
        &coords[a],
        &coords[b],
        &values,
    ))
}

/// Writes the SVG plots for whichever tables are given and returns the paths.
pub fn emit_plots(scan: Option<&ScanTable>, concentration: Option<&[ConcentrationRow]>, outdir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::new();
    if let Some(scan) = scan {
        written.push(write(outdir.join("j_tilde.svg"), &render_chart(&j_tilde_chart(scan)))?);
        written.push(write(outdir.join("expansion_error.svg"), &render_chart(&expansion_chart(scan)))?);
        if let Some(svg) = heatmap_of(scan) {
            written.push(write(outdir.join("j_tilde_heatmap.svg"), &svg)?);
        }
    }
    if let Some(rows) = concentration {
        written.push(write(outdir.join("concentration.svg"), &render_chart(&concentration_chart(rows)))?);
    }
    Ok(written)
}
