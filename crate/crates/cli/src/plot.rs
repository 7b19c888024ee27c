//! Figure data for invariant-set results: SVG overlays or plain JSON.

use std::fmt::Write as _;

use mstep_core::{InvariantSetResult, Polytope, Result};
use serde::Serialize;

const SIZE: f64 = 600.0;
const PAD: f64 = 60.0;
const LEGEND_WIDTH: f64 = 140.0;
const BAR_HEIGHT: f64 = 24.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Serialize)]
pub struct PlotSet {
    pub label: String,
    #[serde(rename = "M")]
    pub hold: usize,
    pub robust: bool,
    pub converged: bool,
    pub empty: bool,
    /// Counterclockwise polygon, or the two interval end points in 1-D.
    pub vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct PlotData {
    /// Axis ranges, one `[lo, hi]` per state coordinate, taken from `X`.
    pub ranges: Vec<[f64; 2]>,
    /// Largest set first.
    pub sets: Vec<PlotSet>,
}

fn label(r: &InvariantSetResult) -> String {
    if r.robust {
        format!("RC^{}", r.hold)
    } else {
        format!("C^{}", r.hold)
    }
}

fn measure(vertices: &[Vec<f64>]) -> f64 {
    match vertices.first().map(Vec::len) {
        Some(1) => vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max)
            - vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min),
        Some(2) => {
            let n = vertices.len();
            (0..n)
                .map(|i| {
                    let (p, q) = (&vertices[i], &vertices[(i + 1) % n]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum::<f64>()
                .abs()
                / 2.0
        }
        _ => 0.0,
    }
}

/// Collects the final sets of `results`, ordered largest to smallest, with
/// axis ranges from the state constraint set (`iterates[0]`) of the first.
pub fn plot_data(results: &[InvariantSetResult]) -> Result<PlotData> {
    let first = results
        .first()
        .ok_or_else(|| mstep_core::Error::InvalidProblem("no results to plot".into()))?;
    let x: &Polytope = first.iterates.first().unwrap_or(&first.final_set);
    let (lo, hi) = x.bounding_box()?;
    let ranges = lo.iter().zip(hi.iter()).map(|(l, h)| [*l, *h]).collect();
    let mut sets = Vec::with_capacity(results.len());
    for r in results {
        let empty = r.final_set.is_empty();
        let vertices = if empty {
            Vec::new()
        } else {
            r.final_set
                .vertices_2d()?
                .into_iter()
                .map(|v| v.iter().copied().collect())
                .collect()
        };
        sets.push(PlotSet {
            label: label(r),
            hold: r.hold,
            robust: r.robust,
            converged: r.converged,
            empty,
            vertices,
        });
    }
    sets.sort_by(|a, b| measure(&b.vertices).total_cmp(&measure(&a.vertices)).then(a.hold.cmp(&b.hold)));
    Ok(PlotData { ranges, sets })
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// SVG 1.1 document: one `<polygon>` per nonempty set, a legend with `∅` for
/// empty ones. Intervals become horizontal bars, one row per set.
pub fn render_svg(data: &PlotData) -> String {
    let dim = data.ranges.len();
    let [x0, x1] = data.ranges[0];
    let (y0, y1) = if dim == 2 {
        (data.ranges[1][0], data.ranges[1][1])
    } else {
        (0.0, data.sets.len().max(1) as f64)
    };
    let height = if dim == 2 {
        SIZE
    } else {
        BAR_HEIGHT * 1.5 * data.sets.len().max(1) as f64
    };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * SIZE;
    let sy = |y: f64| PAD + (y1 - y) / (y1 - y0) * height;
    let total_w = SIZE + 2.0 * PAD + LEGEND_WIDTH;
    let total_h = height + 2.0 * PAD;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt(total_w),
        fmt(total_h),
        fmt(total_w),
        fmt(total_h)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        fmt(PAD),
        fmt(PAD),
        fmt(SIZE),
        fmt(height)
    );
    for (i, set) in data.sets.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if set.empty {
            continue;
        }
        let points: Vec<String> = if dim == 2 {
            set.vertices.iter().map(|v| format!("{},{}", fmt(sx(v[0])), fmt(sy(v[1])))).collect()
        } else {
            let (a, b) = (set.vertices[0][0], set.vertices[1][0]);
            let row = data.sets.len() - 1 - i;
            let (top, bottom) = (sy(row as f64 + 0.75), sy(row as f64 + 0.25));
            [(a, top), (b, top), (b, bottom), (a, bottom)]
                .iter()
                .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(*y)))
                .collect()
        };
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
    }
    let lx = PAD + SIZE + 20.0;
    for (i, set) in data.sets.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = PAD + 20.0 * (i as f64 + 1.0);
        let text = if set.empty { format!("∅ {}", set.label) } else { set.label.clone() };
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
            fmt(lx),
            fmt(ly - 11.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13">{text}</text>"#,
            fmt(lx + 18.0),
            fmt(ly)
        );
    }
    let axis = |v: f64| format!("{v}");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        fmt(PAD),
        fmt(PAD + height + 18.0),
        axis(x0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        fmt(PAD + SIZE),
        fmt(PAD + height + 18.0),
        axis(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">x1</text>"#,
        fmt(PAD + SIZE / 2.0),
        fmt(PAD + height + 36.0)
    );
    if dim == 2 {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            fmt(PAD - 6.0),
            fmt(PAD + height),
            axis(y0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            fmt(PAD - 6.0),
            fmt(PAD + 10.0),
            axis(y1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">x2</text>"#,
            fmt(PAD - 6.0),
            fmt(PAD + height / 2.0)
        );
    }
    s.push_str("</svg>\n");
    s
}
