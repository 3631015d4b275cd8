//! Self-contained SVG scatter plots of 2-D embeddings.

use std::fmt::Write as _;

use ndarray::ArrayView2;

use crate::error::{CbmapError, Result};

/// Tableau 10, a colour-blind-aware categorical palette.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Fraction of the data range added on each side of the plot.
pub const MARGIN: f64 = 0.05;

const PIXELS: u32 = 800;

/// Plot extent in data coordinates, after margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span > 0.0 {
        (lo - MARGIN * span, hi + MARGIN * span)
    } else {
        // single distinct value: give it a unit window
        (lo - 0.5, hi + 0.5)
    }
}

pub fn extent(points: ArrayView2<f64>) -> Extent {
    let fold = |c: usize| {
        points
            .column(c)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (x_min, x_max) = fold(0);
    let (y_min, y_max) = fold(1);
    let (x_min, x_max) = padded(x_min, x_max);
    let (y_min, y_max) = padded(y_min, y_max);
    Extent {
        x_min,
        x_max,
        y_min,
        y_max,
    }
}

/// Render an SVG scatter plot. The `viewBox` is in data units with y flipped,
/// i.e. `viewBox = "x_min -y_max width height"`. One colour per distinct label.
pub fn scatter_svg(
    points: ArrayView2<f64>,
    labels: Option<&[usize]>,
    title: &str,
) -> Result<String> {
    if points.ncols() != 2 {
        return Err(CbmapError::InvalidParameter(format!(
            "scatter plots need a 2-D embedding, got {} columns; fit with --dim 2",
            points.ncols()
        )));
    }
    if points.nrows() == 0 {
        return Err(CbmapError::Degenerate("nothing to plot".into()));
    }
    if let Some(l) = labels {
        if l.len() != points.nrows() {
            return Err(CbmapError::DimensionMismatch {
                left: format!("{} labels", l.len()),
                right: format!("{} points", points.nrows()),
            });
        }
    }
    let e = extent(points);
    let (w, h) = (e.x_max - e.x_min, e.y_max - e.y_min);
    let radius = 0.004 * w.max(h);
    let stroke = 0.002 * w.max(h);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{PIXELS}" viewBox="{:?} {:?} {:?} {:?}" preserveAspectRatio="none">"#,
        e.x_min, -e.y_max, w, h
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{:?}" y="{:?}" width="{:?}" height="{:?}" fill="white" stroke="black" stroke-width="{:?}"/>"#,
        e.x_min, -e.y_max, w, h, stroke
    );
    let _ = writeln!(svg, r#"<g stroke="none">"#);
    for (i, row) in points.outer_iter().enumerate() {
        let color = PALETTE[labels.map_or(0, |l| l[i]) % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.6}" cy="{:.6}" r="{:.6}" fill="{color}"/>"#,
            row[0], -row[1], radius
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
