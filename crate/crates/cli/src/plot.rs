//! Minimal static SVG rendering of two-column CSV artifacts.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 46.0;
const COLORS: [&str; 6] = ["#000000", "#888888", "#c0392b", "#2980b9", "#27ae60", "#8e44ad"];

pub struct Trace {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub scatter: bool,
}

/// Read (x, y) pairs from a headered two-column CSV. A single-column file
/// gets an implicit x = 1..n.
pub fn read_xy(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("{}: bad number {s:?}", path.display()))
        };
        match rec.len() {
            0 => continue,
            1 => out.push(((i + 1) as f64, parse(rec.get(0).unwrap())?)),
            _ => out.push((parse(rec.get(0).unwrap())?, parse(rec.get(1).unwrap())?)),
        }
    }
    if out.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(out)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let step = 10f64.powf((span / 5.0).log10().floor());
    let step = match span / step {
        r if r >= 25.0 => step * 5.0,
        r if r >= 10.0 => step * 2.0,
        _ => step,
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * span {
        out.push(t);
        t += step;
    }
    out
}

/// Render traces into an SVG line/scatter plot with axes and a legend.
pub fn render_svg(traces: &[Trace], title: &str, out: &Path) -> Result<()> {
    if traces.iter().all(|t| t.points.is_empty()) {
        bail!("nothing to plot");
    }
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in traces {
        for (x, y) in &t.points {
            xlo = xlo.min(*x);
            xhi = xhi.max(*x);
            ylo = ylo.min(*y);
            yhi = yhi.max(*y);
        }
    }
    if ylo == yhi {
        ylo -= 0.5;
        yhi += 0.5;
    }
    if xlo == xhi {
        xlo -= 0.5;
        xhi += 0.5;
    }
    let pad = 0.03 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let px = |x: f64| MARGIN_L + (x - xlo) / (xhi - xlo) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - ylo) / (yhi - ylo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        svg,
        r#"<text x="{}" y="16" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    )?;
    // axes
    writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    )?;
    writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    )?;
    for t in nice_ticks(xlo, xhi) {
        let x = px(t);
        writeln!(
            svg,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{t}</text>"#,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0,
            HEIGHT - MARGIN_B + 18.0
        )?;
    }
    for t in nice_ticks(ylo, yhi) {
        let y = py(t);
        writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{MARGIN_L}" y2="{y}" stroke="black"/><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{t:.4}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            y + 4.0
        )?;
    }
    for (i, trace) in traces.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if trace.scatter {
            for (x, y) in &trace.points {
                writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="1.4" fill="{color}" fill-opacity="0.55"/>"#,
                    px(*x),
                    py(*y)
                )?;
            }
        } else {
            let pts: Vec<String> = trace
                .points
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.1"/>"#,
                pts.join(" ")
            )?;
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN_R - 160.0,
            MARGIN_T + 16.0 * (i + 1) as f64,
            trace.label
        )?;
    }
    writeln!(svg, "</svg>")?;
    std::fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}
