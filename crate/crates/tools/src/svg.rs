//! Predicted-vs-true scatter figure: one square panel per (geometry, class),
//! L-shape on the top row and window below, straight left and corner right.
//! Velocity scales are circles, orientation tilts (rad) are triangles.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use skill_core::geometry::WorkpieceKind;
use skill_core::{RuleKind, SegmentClass};

use crate::eval::ScatterRow;

const PANEL: f64 = 300.0;
const MARGIN: f64 = 50.0;
const GAP: f64 = 40.0;

const ROWS: [WorkpieceKind; 2] = [WorkpieceKind::LShape, WorkpieceKind::Window];
const COLS: [SegmentClass; 2] = [SegmentClass::Straight, SegmentClass::Corner];

#[derive(Clone, Debug, PartialEq)]
pub struct PanelLayout {
    pub geometry: WorkpieceKind,
    pub class: SegmentClass,
    /// Pixel position of the panel's top-left corner.
    pub left: f64,
    pub top: f64,
    /// Data range shared by both axes.
    pub lo: f64,
    pub hi: f64,
    /// `(kind, px, py)` per mark.
    pub marks: Vec<(RuleKind, f64, f64)>,
}

impl PanelLayout {
    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let s = PANEL / (self.hi - self.lo);
        (self.left + (x - self.lo) * s, self.top + PANEL - (y - self.lo) * s)
    }
}

fn title(g: WorkpieceKind, c: SegmentClass) -> String {
    let g = match g {
        WorkpieceKind::LShape => "L-shape",
        WorkpieceKind::Window => "Window",
    };
    format!("{g} {c}")
}

pub fn layout(rows: &[ScatterRow]) -> Result<Vec<PanelLayout>> {
    if rows.is_empty() {
        bail!("no scatter rows to plot");
    }
    let mut panels = Vec::with_capacity(4);
    for (r, &geometry) in ROWS.iter().enumerate() {
        for (c, &class) in COLS.iter().enumerate() {
            let members: Vec<&ScatterRow> = rows.iter().filter(|x| x.geometry == geometry && x.class == class).collect();
            let (mut lo, mut hi) = members
                .iter()
                .flat_map(|x| [x.truth, x.prediction])
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (lo, hi) = (0.0, 1.0);
            }
            let pad = ((hi - lo) * 0.05).max(0.05);
            let mut panel = PanelLayout {
                geometry,
                class,
                left: MARGIN + c as f64 * (PANEL + GAP + MARGIN),
                top: MARGIN + r as f64 * (PANEL + GAP + MARGIN),
                lo: lo - pad,
                hi: hi + pad,
                marks: Vec::new(),
            };
            panel.marks = members
                .iter()
                .filter(|x| x.truth.is_finite() && x.prediction.is_finite())
                .map(|x| {
                    let (px, py) = panel.to_px(x.truth, x.prediction);
                    (x.kind, px, py)
                })
                .collect();
            panels.push(panel);
        }
    }
    Ok(panels)
}

pub fn render_scatter(rows: &[ScatterRow]) -> Result<String> {
    let panels = layout(rows)?;
    let width = 2.0 * (PANEL + MARGIN) + GAP + MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{width}" viewBox="0 0 {width} {width}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    for p in &panels {
        let (l, t) = (p.left, p.top);
        writeln!(s, r#"<g class="panel">"#)?;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, l + PANEL / 2.0, t - 10.0, title(p.geometry, p.class))?;
        writeln!(s, r#"<rect x="{l}" y="{t}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#)?;
        let (x0, y0) = p.to_px(p.lo, p.lo);
        let (x1, y1) = p.to_px(p.hi, p.hi);
        writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="6,4"/>"#)?;
        writeln!(s, r#"<text x="{l}" y="{}">{:.2}</text>"#, t + PANEL + 15.0, p.lo)?;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, l + PANEL, t + PANEL + 15.0, p.hi)?;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, l - 4.0, t + 10.0, p.hi)?;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">actual</text>"#, l + PANEL / 2.0, t + PANEL + 30.0)?;
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">predicted</text>"#,
            l - 15.0,
            t + PANEL / 2.0,
            l - 15.0,
            t + PANEL / 2.0
        )?;
        for &(kind, x, y) in &p.marks {
            match kind {
                RuleKind::VelocityScale => {
                    writeln!(s, r##"<circle cx="{x}" cy="{y}" r="3" fill="none" stroke="#1f77b4"/>"##)?;
                }
                RuleKind::OrientationOffset => {
                    writeln!(
                        s,
                        r##"<polygon points="{},{} {},{} {},{}" fill="none" stroke="#d62728"/>"##,
                        x,
                        y - 3.5,
                        x - 3.0,
                        y + 2.0,
                        x + 3.0,
                        y + 2.0
                    )?;
                }
            }
        }
        writeln!(s, "</g>")?;
    }
    let ly = width - 15.0;
    writeln!(s, r##"<circle cx="{MARGIN}" cy="{}" r="3" fill="none" stroke="#1f77b4"/>"##, ly - 4.0)?;
    writeln!(s, r#"<text x="{}" y="{ly}">velocity scale</text>"#, MARGIN + 8.0)?;
    writeln!(
        s,
        r##"<polygon points="{},{} {},{} {},{}" fill="none" stroke="#d62728"/>"##,
        MARGIN + 150.0,
        ly - 7.5,
        MARGIN + 147.0,
        ly - 2.0,
        MARGIN + 153.0,
        ly - 2.0
    )?;
    writeln!(s, r#"<text x="{}" y="{ly}">orientation offset (rad)</text>"#, MARGIN + 158.0)?;
    writeln!(s, "</svg>")?;
    Ok(s)
}
