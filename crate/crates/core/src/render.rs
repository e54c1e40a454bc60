//! Deterministic SVG rendering of truncations with classes colored; merged
//! classes are additionally drawn as contracted nodes in a side panel.

use crate::geometry::Scalar;
use crate::relations::Partition;
use crate::truncation::TruncatedCompactum;

const UNITS_PER_COORD: i64 = 1000;

fn px(v: &Scalar) -> i64 {
    use num_traits::ToPrimitive;
    (v * &Scalar::int(UNITS_PER_COORD)).floor_int().to_i64().unwrap_or(0)
}

fn class_color(index: usize) -> String {
    format!("hsl({}, 70%, 45%)", (index * 137) % 360)
}

/// One group per class with stable ids (`class-<rep>`), suitable for
/// diff-based golden tests.
pub fn render_svg(t: &TruncatedCompactum, p: &Partition) -> String {
    let bbox = {
        let mut b = t.pieces[0].geometry.bbox();
        for piece in &t.pieces[1..] {
            b = b.union_bbox(&piece.geometry.bbox());
        }
        b
    };
    let margin = 40i64;
    let x0 = px(&bbox.x0) - margin;
    let y_top = px(&bbox.y1);
    let width = px(&bbox.x1) - px(&bbox.x0) + 2 * margin;
    let panel_height = 140i64;
    let height = y_top - px(&bbox.y0) + 2 * margin + panel_height;
    // SVG y grows downward; flip around the top edge.
    let flip = |v: &Scalar| y_top - px(v) + margin;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0} 0 {width} {height}\">\n"
    ));
    out.push_str("<rect fill=\"white\" x=\"-100000\" y=\"-100000\" width=\"200000\" height=\"200000\"/>\n");

    let mut merged_panel: Vec<String> = Vec::new();
    for (index, (rep, info)) in p.classes().enumerate() {
        let color = class_color(index);
        out.push_str(&format!("<g id=\"class-{rep:06}\" stroke=\"{color}\" fill=\"{color}\">\n"));
        for &a in &info.atoms {
            let r = &t.atom(a).rect;
            let (rx0, rx1) = (px(&r.x0), px(&r.x1));
            let (ry0, ry1) = (flip(&r.y1), flip(&r.y0));
            if rx0 == rx1 || ry0 == ry1 {
                out.push_str(&format!(
                    "<line x1=\"{rx0}\" y1=\"{ry0}\" x2=\"{rx1}\" y2=\"{ry1}\" stroke-width=\"6\"/>\n"
                ));
            } else {
                out.push_str(&format!(
                    "<rect x=\"{rx0}\" y=\"{ry0}\" width=\"{}\" height=\"{}\"/>\n",
                    rx1 - rx0,
                    ry1 - ry0
                ));
            }
        }
        out.push_str("</g>\n");
        if info.atoms.len() >= 2 {
            merged_panel.push(format!(
                "<circle id=\"node-{rep:06}\" cx=\"{}\" cy=\"{}\" r=\"18\" fill=\"{color}\"/>",
                x0 + margin + 50 * merged_panel.len() as i64,
                y_top - px(&bbox.y0) + margin + panel_height / 2,
            ));
        }
    }
    // Contracted quotient nodes: one dot per merged class (no claim of a
    // planar re-embedding).
    out.push_str("<g id=\"quotient-panel\">\n");
    for c in merged_panel {
        out.push_str(&c);
        out.push('\n');
    }
    out.push_str("</g>\n</svg>\n");
    out
}
