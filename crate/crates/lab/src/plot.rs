//! Hand-written SVG line plot of report curves.

use std::fmt::Write as _;

use crate::report::Report;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf"];
const EXPERT_COLOR: &str = "#ff7f0e";

/// Data-space extent of the plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Covers every curve, band and the expert line, padded by 5%.
pub fn bounds(report: &Report) -> Bounds {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, points) in &report.curves {
        for p in points {
            lo = lo.min(p.ci_lo).min(p.median);
            hi = hi.max(p.ci_hi).max(p.median);
        }
    }
    if let Some(e) = report.expert_return {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    Bounds {
        x_max: report.total_steps.max(1) as f64,
        y_min: lo - pad,
        y_max: hi + pad,
    }
}

pub fn render(report: &Report) -> String {
    let b = bounds(report);
    let px = |t: f64| MARGIN + t / b.x_max * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - b.y_min) / (b.y_max - b.y_min) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (px(0.0), px(b.x_max), py(b.y_min), py(b.y_max));
    writeln!(w, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#).unwrap();
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let y = b.y_min + f * (b.y_max - b.y_min);
        let t = f * b.x_max;
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.0}</text>"#, x0 - 6.0, py(y) + 4.0).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.0}</text>"#, px(t), y0 + 18.0).unwrap();
    }
    writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment steps</text>"#, WIDTH / 2.0, HEIGHT - 15.0).unwrap();
    for (k, (label, points)) in report.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if points.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in points {
            write!(band, "{:.1},{:.1} ", px(p.t as f64), py(p.ci_hi)).unwrap();
        }
        for p in points.iter().rev() {
            write!(band, "{:.1},{:.1} ", px(p.t as f64), py(p.ci_lo)).unwrap();
        }
        writeln!(w, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end()).unwrap();
        let line: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", px(p.t as f64), py(p.median)))
            .collect();
        writeln!(w, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" ")).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" fill="{color}">{label}</text>"#, x0 + 10.0, y1 + 16.0 * (k as f64 + 1.0)).unwrap();
    }
    if let Some(e) = report.expert_return {
        writeln!(w, r#"<line x1="{x0:.1}" y1="{0:.1}" x2="{x1:.1}" y2="{0:.1}" stroke="{EXPERT_COLOR}" stroke-dasharray="6,4"/>"#, py(e)).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" fill="{EXPERT_COLOR}" text-anchor="end">expert</text>"#, x1, py(e) - 4.0).unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    s
}
