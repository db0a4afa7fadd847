use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{mean_std, read_records};
use crate::error::{Error, Result};

/// Runs drawn as one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGroup {
    pub label: String,
    pub paths: Vec<PathBuf>,
}

/// Groups run CSVs by the file name part before `_seed`.
pub fn group_by_mode(paths: &[PathBuf]) -> Vec<CurveGroup> {
    let mut groups: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for p in paths {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let label = stem.split("_seed").next().unwrap_or(&stem).to_string();
        groups.entry(label).or_default().push(p.clone());
    }
    groups.into_iter().map(|(label, paths)| CurveGroup { label, paths }).collect()
}

/// Per-iteration mean and std of `return` across a group's runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub iterations: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn load_curve(group: &CurveGroup) -> Result<Curve> {
    let mut grid: Option<(Vec<u64>, &Path)> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for path in &group.paths {
        let records = read_records(path)?;
        let its: Vec<u64> = records.iter().map(|r| r.iteration).collect();
        match &grid {
            Some((g, first)) if *g != its => {
                return Err(Error::Config(format!(
                    "iteration grid of {} differs from {}",
                    path.display(),
                    first.display()
                )))
            }
            Some(_) => {}
            None => grid = Some((its, path)),
        }
        columns.push(records.iter().map(|r| r.ret).collect());
    }
    let (iterations, _) = grid.ok_or_else(|| Error::Config(format!("curve `{}` has no files", group.label)))?;
    let (mean, std) = (0..iterations.len())
        .map(|t| mean_std(&columns.iter().map(|c| c[t]).collect::<Vec<_>>()))
        .unzip();
    Ok(Curve { label: group.label.clone(), iterations, mean, std })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 800.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Writes an SVG with each group's mean curve and a ±1 std band.
pub fn plot_curves(groups: &[CurveGroup], out: &Path) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Config("nothing to plot".into()));
    }
    let curves = groups.iter().map(load_curve).collect::<Result<Vec<_>>>()?;
    let svg = render_svg(&curves);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(out, svg).map_err(|e| Error::io(out, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(curves: &[Curve]) -> String {
    let xs = curves.iter().flat_map(|c| c.iterations.iter().map(|&i| i as f64));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let ys = curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).flat_map(|(m, s)| [m - s, m + s]))
        .filter(|v| v.is_finite());
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !(y0.is_finite() && y1.is_finite()) {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.0}</text>"#, px(xv), bottom + 18.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, left - 6.0, py(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">return</text>"#, H / 2.0, H / 2.0);

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = |f: &dyn Fn(usize) -> f64| -> Vec<String> {
            (0..c.iterations.len()).map(|t| format!("{:.2},{:.2}", px(c.iterations[t] as f64), py(f(t)))).collect()
        };
        let upper = pts(&|t| c.mean[t] + c.std[t]);
        let mut lower = pts(&|t| c.mean[t] - c.std[t]);
        lower.reverse();
        let band = upper.iter().chain(&lower).cloned().collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, r#"<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
        let line = pts(&|t| c.mean[t]).join(" ");
        let _ = writeln!(s, r#"<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#, right - 130.0, right - 110.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, right - 104.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}
