//! SVG views of a result: an image-plane overlay of wireframes and
//! occlusion masks, and a bird's-eye plot of estimated (red) and
//! ground-truth (green) footprints.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::Result;
use crate::evidence::GroundTruthScene;
use crate::geometry::{place_wireframe, Camera, GroundPlane, ObjectPose};
use crate::inference::InferenceResult;
use crate::masks::{MaskCatalog, PartState, GRID};
use crate::shape::{ShapeCoefficients, ShapeSpace};
use crate::Point2;

pub const ESTIMATE_COLOR: &str = "#d62728";
pub const TRUTH_COLOR: &str = "#2ca02c";
pub const MASK_COLOR: &str = "#1f77b4";

/// Unique undirected edges of a triangle list, sorted.
pub fn wireframe_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

fn part_color(s: PartState) -> &'static str {
    match s {
        PartState::Visible => "#ffbf00",
        PartState::SelfOccluded => "#7f7f7f",
        PartState::MaskOccluded => MASK_COLOR,
    }
}

/// Projected wireframes of all estimated objects over an image-sized
/// canvas, with each object's occlusion mask drawn as blue cells over its
/// part bounding box.
pub fn render_overlay(
    result: &InferenceResult,
    camera: &Camera,
    space: &ShapeSpace,
    catalog: &MaskCatalog,
) -> Result<String> {
    let (w, h) = (camera.width, camera.height);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#f4f4f4" stroke="#000000"/>"##
    );
    let edges = wireframe_edges(&space.faces);
    for (hyp, est) in result.scene.objects.iter().zip(&result.objects) {
        let mask = catalog.get(hyp.mask_id);
        if let Some(mask) = mask.filter(|m| m.coverage_fraction > 0.0) {
            let b = &est.bbox;
            let (cw, ch) = (b.width() / GRID as f64, b.height() / GRID as f64);
            let _ = writeln!(
                svg,
                r#"<g class="mask" fill="{MASK_COLOR}" fill-opacity="0.35" stroke="none">"#
            );
            for row in 0..GRID {
                // One rectangle per horizontal run of covered cells.
                let mut col = 0;
                while col < GRID {
                    if !mask.covers(row * GRID + col) {
                        col += 1;
                        continue;
                    }
                    let start = col;
                    while col < GRID && mask.covers(row * GRID + col) {
                        col += 1;
                    }
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                        b.min_u + start as f64 * cw,
                        b.min_v + row as f64 * ch,
                        (col - start) as f64 * cw,
                        ch
                    );
                }
            }
            svg.push_str("</g>\n");
        }
        let _ = writeln!(
            svg,
            r##"<g class="wireframe" stroke="#ff7f0e" stroke-width="1" fill="none">"##
        );
        for (a, b) in &edges {
            let (pa, pb) = (&est.parts_px[*a], &est.parts_px[*b]);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                pa.x, pa.y, pb.x, pb.y
            );
        }
        svg.push_str("</g>\n");
        for (p, s) in est.parts_px.iter().zip(&est.states) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                p.x,
                p.y,
                part_color(*s)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Every mask of the catalog as a small tile in a grid sheet, `columns`
/// tiles per row, covered cells in blue.
pub fn render_mask_sheet(catalog: &MaskCatalog, columns: usize, cell_px: f64) -> String {
    let columns = columns.max(1);
    let tile = GRID as f64 * cell_px;
    let gap = 4.0;
    let rows = catalog.len().div_ceil(columns);
    let w = columns as f64 * (tile + gap) + gap;
    let h = rows as f64 * (tile + gap) + gap;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    for (i, mask) in catalog.masks.iter().enumerate() {
        let x0 = gap + (i % columns) as f64 * (tile + gap);
        let y0 = gap + (i / columns) as f64 * (tile + gap);
        let _ = writeln!(
            svg,
            r##"<g class="mask" id="mask-{}"><rect x="{x0:.2}" y="{y0:.2}" width="{tile:.2}" height="{tile:.2}" fill="#ffffff" stroke="#000000" stroke-width="0.5"/>"##,
            mask.id
        );
        for row in 0..GRID {
            let mut col = 0;
            while col < GRID {
                if !mask.covers(row * GRID + col) {
                    col += 1;
                    continue;
                }
                let start = col;
                while col < GRID && mask.covers(row * GRID + col) {
                    col += 1;
                }
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{MASK_COLOR}"/>"#,
                    x0 + start as f64 * cell_px,
                    y0 + row as f64 * cell_px,
                    (col - start) as f64 * cell_px,
                    cell_px
                );
            }
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

/// Plot window of the bird's-eye view in ground coordinates (metres),
/// with `+z` (forward) pointing up the page.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BirdseyeFrame {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Pixels per metre.
    pub scale: f64,
    pub margin: f64,
}

impl Default for BirdseyeFrame {
    fn default() -> Self {
        Self {
            x_min: -15.0,
            x_max: 15.0,
            z_min: 0.0,
            z_max: 40.0,
            scale: 12.0,
            margin: 30.0,
        }
    }
}

impl BirdseyeFrame {
    pub fn to_plot(&self, x: f64, z: f64) -> Point2 {
        Point2::new(
            self.margin + (x - self.x_min) * self.scale,
            self.margin + (self.z_max - z) * self.scale,
        )
    }

    pub fn width(&self) -> f64 {
        2.0 * self.margin + (self.x_max - self.x_min) * self.scale
    }

    pub fn height(&self) -> f64 {
        2.0 * self.margin + (self.z_max - self.z_min) * self.scale
    }
}

/// Convex hull (counter-clockwise, no repeated point) of the object's
/// vertices projected onto the ground `x`–`z` plane.
pub fn footprint(space: &ShapeSpace, shape: &ShapeCoefficients, pose: &ObjectPose) -> Result<Vec<Point2>> {
    let wire = space.instantiate(shape)?;
    // On a level plane at zero height camera and ground coordinates agree.
    let placed = place_wireframe(&wire, pose, &GroundPlane::flat(0.0));
    let pts: Vec<Point2> = placed.iter().map(|p| Point2::new(p.x, p.z)).collect();
    Ok(convex_hull(pts))
}

fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point2, a: &Point2, b: &Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn polygon(svg: &mut String, frame: &BirdseyeFrame, pts: &[Point2], color: &str, class: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let q = frame.to_plot(p.x, p.y);
            format!("{:.2},{:.2}", q.x, q.y)
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"<polygon class="{class}" points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

fn center_mark(svg: &mut String, frame: &BirdseyeFrame, pose: &ObjectPose, color: &str, class: &str) {
    let c = frame.to_plot(pose.x, pose.z);
    let _ = writeln!(
        svg,
        r#"<circle class="{class}-center" cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#,
        c.x, c.y
    );
}

/// Bird's-eye view of estimated (red) and ground-truth (green) object
/// footprints. Either side may be absent; with neither, only the axes are drawn.
pub fn render_birdseye(
    result: Option<&InferenceResult>,
    gt: Option<&GroundTruthScene>,
    space: &ShapeSpace,
    frame: &BirdseyeFrame,
) -> Result<String> {
    let (w, h) = (frame.width(), frame.height());
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    svg.push_str(
        "<g class=\"axes\" stroke=\"#000000\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"10\">\n",
    );
    let o = frame.to_plot(0.0, frame.z_min);
    let top = frame.to_plot(0.0, frame.z_max);
    let left = frame.to_plot(frame.x_min, frame.z_min);
    let right = frame.to_plot(frame.x_max, frame.z_min);
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        o.x, o.y, top.x, top.y
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        left.x, left.y, right.x, right.y
    );
    let mut z = (frame.z_min / 5.0).ceil() * 5.0;
    while z <= frame.z_max + 1e-9 {
        let p = frame.to_plot(0.0, z);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><text x="{:.2}" y="{:.2}" stroke="none">{z:.0}</text>"#,
            p.x - 3.0,
            p.y,
            p.x + 3.0,
            p.y,
            p.x + 5.0,
            p.y + 3.0
        );
        z += 5.0;
    }
    let mut x = (frame.x_min / 5.0).ceil() * 5.0;
    while x <= frame.x_max + 1e-9 {
        let p = frame.to_plot(x, frame.z_min);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><text x="{:.2}" y="{:.2}" stroke="none">{x:.0}</text>"#,
            p.x,
            p.y - 3.0,
            p.x,
            p.y + 3.0,
            p.x - 4.0,
            p.y + 14.0
        );
        x += 5.0;
    }
    svg.push_str("</g>\n");
    if let Some(gt) = gt {
        for obj in &gt.objects {
            polygon(
                &mut svg,
                frame,
                &footprint(space, &obj.shape, &obj.pose)?,
                TRUTH_COLOR,
                "truth",
            );
            center_mark(&mut svg, frame, &obj.pose, TRUTH_COLOR, "truth");
        }
    }
    if let Some(r) = result {
        for obj in &r.scene.objects {
            polygon(
                &mut svg,
                frame,
                &footprint(space, &obj.shape, &obj.pose)?,
                ESTIMATE_COLOR,
                "estimate",
            );
            center_mark(&mut svg, frame, &obj.pose, ESTIMATE_COLOR, "estimate");
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_point() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let hull = convex_hull(pts);
        assert_eq!(hull.len(), 4);
        assert!(!hull.contains(&Point2::new(0.5, 0.5)));
    }

    #[test]
    fn edges_are_deduplicated() {
        assert_eq!(
            wireframe_edges(&[[0, 1, 2], [2, 1, 3]]),
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]
        );
    }

    #[test]
    fn frame_maps_corners() {
        let f = BirdseyeFrame::default();
        assert_eq!(f.to_plot(f.x_min, f.z_max), Point2::new(f.margin, f.margin));
        assert_eq!(
            f.to_plot(f.x_max, f.z_min),
            Point2::new(f.width() - f.margin, f.height() - f.margin)
        );
    }
}
