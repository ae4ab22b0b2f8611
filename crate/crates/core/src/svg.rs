//! SVG rendering of 2-D decompositions.

use std::fmt::Write;

use crate::collision::{Obstacle, Scene};
use crate::decomposition::{CellStatus, SplitTree};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Polyline};

const SIZE: f64 = 800.0;
/// Cells per axis when rasterizing polynomial obstacles.
const RASTER: usize = 100;

fn x(v: f64) -> f64 {
    v * SIZE
}

fn y(v: f64) -> f64 {
    (1.0 - v) * SIZE
}

fn rect(out: &mut String, b: &Aabb, style: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.6}" y="{:.6}" width="{:.6}" height="{:.6}" {style}/>"#,
        x(b.lower[0]),
        y(b.upper[1]),
        x(b.upper[0]) - x(b.lower[0]),
        y(b.lower[1]) - y(b.upper[1]),
    );
}

fn obstacle(out: &mut String, o: &Obstacle) {
    const STYLE: &str = r##"class="obstacle" fill="#444444" fill-opacity="0.6""##;
    match o {
        Obstacle::Box { lower, upper } => rect(
            out,
            &Aabb {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            STYLE,
        ),
        Obstacle::Union { members } => members.iter().for_each(|m| obstacle(out, m)),
        Obstacle::Polynomial { .. } => {
            let h = 1.0 / RASTER as f64;
            for i in 0..RASTER {
                for j in 0..RASTER {
                    let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                    if o.contains(&c) {
                        let b = Aabb::from_bounds(vec![i as f64 * h, j as f64 * h], vec![(i + 1) as f64 * h, (j + 1) as f64 * h])
                            .expect("raster cells lie in the unit square");
                        rect(out, &b, STYLE);
                    }
                }
            }
        }
    }
}

/// Draws leaves coloured by status, obstacles, stored samples and `path`.
/// Output depends only on the inputs.
pub fn render_svg(tree: &SplitTree, scene: &Scene, path: Option<&Polyline>) -> Result<String> {
    if scene.dimension != 2 || tree.dimension() != 2 {
        return Err(Error::RenderDimension);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&scene.name));
    for c in tree.leaves() {
        let (class, fill) = match c.status {
            CellStatus::PossiblyFree => ("free", "#d9f2d9"),
            CellStatus::PossiblyOccupied => ("occupied", "#f2d0d0"),
            CellStatus::Mixed => ("mixed", "#f2ecc0"),
        };
        rect(
            &mut out,
            &c.bbox,
            &format!(r##"class="cell {class}" fill="{fill}" stroke="#333333" stroke-width="0.5""##),
        );
    }
    for o in &scene.obstacles {
        obstacle(&mut out, o);
    }
    for c in tree.leaves() {
        for (s, fill) in c.free.iter().map(|s| (s, "#1a7f1a")).chain(c.colliding.iter().map(|s| (s, "#b01c1c"))) {
            let _ = writeln!(
                out,
                r#"<circle class="sample" cx="{:.6}" cy="{:.6}" r="2" fill="{fill}"/>"#,
                x(s.q[0]),
                y(s.q[1])
            );
        }
    }
    if let Some(p) = path {
        let pts: Vec<String> = p
            .waypoints()
            .iter()
            .map(|q| format!("{:.6},{:.6}", x(q[0]), y(q[1])))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline class="path" points="{}" fill="none" stroke="#1f4fbf" stroke-width="2"/>"##,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
