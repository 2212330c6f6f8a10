//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use scenewire::evidence::{render_response_stack, GroundTruthScene, NoiseParams, PyramidSpec, ResponseStack};
use scenewire::geometry::{BBox2, Camera, PlacedObject};
use scenewire::masks::{generate_mask_catalog, MaskCatalog, MaskParams, PartState, GRID};
use scenewire::shape::{fit_shape_space, generate_exemplars, ExemplarSet, ShapeSpace};
use scenewire::{Point2, Point3, Vector3};

pub fn exemplars() -> &'static ExemplarSet {
    static SET: OnceLock<ExemplarSet> = OnceLock::new();
    SET.get_or_init(|| generate_exemplars(38, 7))
}

pub fn space() -> &'static ShapeSpace {
    static SPACE: OnceLock<ShapeSpace> = OnceLock::new();
    SPACE.get_or_init(|| {
        let set = exemplars();
        fit_shape_space(&set.exemplars, 5)
            .unwrap()
            .with_part_names(set.part_names.clone())
            .unwrap()
    })
}

pub fn catalog() -> &'static MaskCatalog {
    static CATALOG: OnceLock<MaskCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| generate_mask_catalog(&MaskParams::default()).unwrap())
}

/// Noise-free evidence: unit floor, no clutter, exact bumps.
pub fn clean_noise() -> NoiseParams {
    NoiseParams {
        floor_noise: 0.0,
        clutter_density: 0.0,
        occluder_clutter: 0.0,
        location_noise_px: 0.0,
        miss_prob: 0.0,
        peak_jitter: 0.0,
        ..NoiseParams::default()
    }
}

pub fn clean_stack(scene: &GroundTruthScene) -> ResponseStack {
    render_response_stack(
        scene,
        space().vertex_count(),
        &clean_noise(),
        &PyramidSpec::default(),
        1,
    )
    .unwrap()
}

/// Software depth buffer over an image region, sampled at `res x res`
/// cell centers. Depth at a cell is found by intersecting the cell's pixel
/// ray with each covering triangle's plane; the front triangle of every
/// cell is kept so queries can evaluate its plane at the exact point.
pub struct ZBuffer {
    pub region: BBox2,
    pub res: usize,
    pub depth: Vec<f64>,
    front: Vec<Option<usize>>,
    /// Plane of every rasterized triangle as (normal, point).
    planes: Vec<(Vector3, Point3)>,
    cam: Camera,
}

impl ZBuffer {
    pub fn render(meshes: &[&PlacedObject], cam: &Camera, region: BBox2, res: usize) -> Self {
        let mut depth = vec![f64::INFINITY; res * res];
        let mut front = vec![None; res * res];
        let mut planes = Vec::new();
        let (cw, ch) = (region.width() / res as f64, region.height() / res as f64);
        for obj in meshes {
            let px: Vec<Point2> = obj.vertices.iter().map(|p| cam.project_point(p).unwrap()).collect();
            for f in obj.faces.iter() {
                let (a, b, c) = (px[f[0]], px[f[1]], px[f[2]]);
                let (pa, pb, pc) = (obj.vertices[f[0]], obj.vertices[f[1]], obj.vertices[f[2]]);
                let n = (pb - pa).cross(&(pc - pa));
                let area = edge(&a, &b, &c);
                if area.abs() < 1e-12 {
                    continue;
                }
                let tri = planes.len();
                planes.push((n, pa));
                let lo_u = a.x.min(b.x).min(c.x);
                let hi_u = a.x.max(b.x).max(c.x);
                let lo_v = a.y.min(b.y).min(c.y);
                let hi_v = a.y.max(b.y).max(c.y);
                let col0 = (((lo_u - region.min_u) / cw).floor().max(0.0)) as usize;
                let col1 = ((((hi_u - region.min_u) / cw).ceil()).max(0.0) as usize).min(res);
                let row0 = (((lo_v - region.min_v) / ch).floor().max(0.0)) as usize;
                let row1 = ((((hi_v - region.min_v) / ch).ceil()).max(0.0) as usize).min(res);
                for row in row0..row1 {
                    let v = region.min_v + (row as f64 + 0.5) * ch;
                    for col in col0..col1 {
                        let u = region.min_u + (col as f64 + 0.5) * cw;
                        let p = Point2::new(u, v);
                        let (w0, w1, w2) = (edge(&b, &c, &p), edge(&c, &a, &p), edge(&a, &b, &p));
                        let inside = if area > 0.0 {
                            w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0
                        } else {
                            w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0
                        };
                        if !inside {
                            continue;
                        }
                        let d = Vector3::new((u - cam.cx) / cam.fx, -(v - cam.cy) / cam.fy, 1.0);
                        let denom = n.dot(&d);
                        if denom.abs() < 1e-15 {
                            continue;
                        }
                        // Ray has unit z, so the parameter is the depth.
                        let z = n.dot(&pa.coords) / denom;
                        let k = row * res + col;
                        if z > 0.0 && z < depth[k] {
                            depth[k] = z;
                            front[k] = Some(tri);
                        }
                    }
                }
            }
        }
        Self {
            region,
            res,
            depth,
            front,
            planes,
            cam: *cam,
        }
    }

    fn cell_of(&self, uv: &Point2) -> Option<(usize, usize)> {
        let col = ((uv.x - self.region.min_u) / self.region.width() * self.res as f64).floor();
        let row = ((uv.y - self.region.min_v) / self.region.height() * self.res as f64).floor();
        if col < 0.0 || row < 0.0 || col >= self.res as f64 || row >= self.res as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// A point is hidden when the front surface of its cell, evaluated along
    /// the point's own pixel ray, lies clearly in front of it.
    pub fn hidden_at(&self, uv: &Point2, depth: f64, tol: f64) -> bool {
        let Some((r, c)) = self.cell_of(uv) else { return false };
        let Some(tri) = self.front[r * self.res + c] else {
            return false;
        };
        let (n, pa) = &self.planes[tri];
        let d = Vector3::new(
            (uv.x - self.cam.cx) / self.cam.fx,
            -(uv.y - self.cam.cy) / self.cam.fy,
            1.0,
        );
        let denom = n.dot(&d);
        if denom.abs() < 1e-15 {
            return self.depth[r * self.res + c] < depth - tol;
        }
        n.dot(&pa.coords) / denom < depth - tol
    }

    pub fn hidden(&self, p: &Point3, tol: f64) -> bool {
        let uv = self.cam.project_point(p).unwrap();
        self.hidden_at(&uv, p.z, tol)
    }

    /// True when the hidden/visible decision changes within `radius_px`
    /// image pixels of the point's projection.
    pub fn near_edge(&self, p: &Point3, tol: f64, radius_px: f64) -> bool {
        let uv = self.cam.project_point(p).unwrap();
        let center = self.hidden_at(&uv, p.z, tol);
        let steps = 8;
        for i in -steps..=steps {
            for j in -steps..=steps {
                let du = radius_px * i as f64 / steps as f64;
                let dv = radius_px * j as f64 / steps as f64;
                if du * du + dv * dv > radius_px * radius_px {
                    continue;
                }
                if self.hidden_at(&Point2::new(uv.x + du, uv.y + dv), p.z, tol) != center {
                    return true;
                }
            }
        }
        false
    }
}

fn edge(a: &Point2, b: &Point2, p: &Point2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Square region around every projected vertex of `objects`, padded.
pub fn region_around(objects: &[&PlacedObject], cam: &Camera) -> BBox2 {
    let px: Vec<Point2> = objects
        .iter()
        .flat_map(|o| o.vertices.iter().map(|p| cam.project_point(p).unwrap()))
        .collect();
    let b = BBox2::from_points(&px).unwrap();
    let side = b.width().max(b.height()) + 4.0;
    let c = b.center();
    BBox2::new(c.x - side / 2.0, c.y - side / 2.0, c.x + side / 2.0, c.y + side / 2.0)
}

/// Grid cell of each pixel, normalized by the pixels' own tight box;
/// written independently of the library's lookup.
pub fn oracle_cells(pixels: &[Point2]) -> Vec<usize> {
    let min_u = pixels.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_u = pixels.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_v = pixels.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_v = pixels.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    pixels
        .iter()
        .map(|p| {
            let u = if max_u > min_u {
                (p.x - min_u) / (max_u - min_u)
            } else {
                0.5
            };
            let v = if max_v > min_v {
                (p.y - min_v) / (max_v - min_v)
            } else {
                0.5
            };
            let col = ((u * GRID as f64) as usize).min(GRID - 1);
            let row = ((v * GRID as f64) as usize).min(GRID - 1);
            row * GRID + col
        })
        .collect()
}

/// Brute-force weighted covering selection over every mask.
pub fn brute_covering(occluded: &[usize], self_occ: &[bool], cells: &[usize], catalog: &MaskCatalog) -> usize {
    let mut scored: Vec<(i64, f64, usize)> = catalog
        .masks
        .iter()
        .map(|m| {
            let mut s = 0i64;
            for j in 0..cells.len() {
                if self_occ[j] {
                    continue;
                }
                let hid = m.grid[cells[j]];
                if occluded.contains(&j) {
                    s += if hid { 2 } else { 0 };
                } else {
                    s += if hid { 0 } else { 1 };
                }
            }
            (s, m.coverage_fraction, m.id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored[0].2
}

/// Brute-force evidence selection over `candidates`: the object score is
/// recomputed from raw per-level log-ratios for every mask.
pub fn brute_evidence(
    evidence: &[Vec<f64>],
    self_occ: &[bool],
    cells: &[usize],
    catalog: &MaskCatalog,
    candidates: &[usize],
    c: f64,
) -> (usize, f64) {
    let m = self_occ.iter().filter(|s| !**s).count() as f64;
    let mut best: Option<(f64, f64, usize)> = None;
    for &id in candidates {
        let mask = &catalog.masks[id];
        let hidden = (0..self_occ.len())
            .filter(|&j| !self_occ[j] && mask.grid[cells[j]])
            .count();
        let mut top = f64::NEG_INFINITY;
        for row in evidence {
            let mut total = 0.0;
            for j in 0..self_occ.len() {
                if !self_occ[j] && !mask.grid[cells[j]] {
                    total += row[j];
                }
            }
            top = top.max(total);
        }
        let s = (top + c * hidden as f64) / m;
        let take = match best {
            None => true,
            Some((bs, bc, bid)) => s > bs || (s == bs && (mask.coverage_fraction, id) < (bc, bid)),
        };
        if take {
            best = Some((s, mask.coverage_fraction, id));
        }
    }
    let (s, _, id) = best.unwrap();
    (id, s)
}

pub fn count_state(states: &[PartState], s: PartState) -> usize {
    states.iter().filter(|x| **x == s).count()
}

/// Outcome of comparing ray-cast visibility with the z-buffer oracle.
#[derive(Clone, Copy, Debug, Default)]
pub struct Agreement {
    pub total: usize,
    pub agree: usize,
    /// Disagreements farther than one pixel from any visibility change.
    pub off_edge: usize,
}

impl Agreement {
    pub fn add(&mut self, o: Agreement) {
        self.total += o.total;
        self.agree += o.agree;
        self.off_edge += o.off_edge;
    }

    pub fn rate(&self) -> f64 {
        self.agree as f64 / self.total as f64
    }
}

/// Depth tolerance of the oracle: a surface must be this much closer
/// than a vertex to hide it.
pub const ZBUFFER_TOL: f64 = 0.01;

/// Compares self-occlusion plus mutual occlusion of every object in
/// `objects` with a `res x res` z-buffer of the whole scene.
pub fn zbuffer_agreement(objects: &[PlacedObject], cam: &Camera, res: usize) -> Agreement {
    use scenewire::geometry::{mutual_occlusion, self_occlusion};
    let refs: Vec<&PlacedObject> = objects.iter().collect();
    let zb = ZBuffer::render(&refs, cam, region_around(&refs, cam), res);
    let mut out = Agreement::default();
    for (beta, obj) in objects.iter().enumerate() {
        let so = self_occlusion(obj);
        let gamma = mutual_occlusion(objects, beta);
        for (j, v) in obj.vertices.iter().enumerate() {
            let hidden = so[j] || gamma.contains(&j);
            let oracle = zb.hidden(v, ZBUFFER_TOL);
            out.total += 1;
            if hidden == oracle {
                out.agree += 1;
            } else if !zb.near_edge(v, ZBUFFER_TOL, 1.0) {
                out.off_edge += 1;
            }
        }
    }
    out
}
