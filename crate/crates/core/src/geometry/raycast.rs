//! Camera-ray visibility tests against triangle meshes.
//!
//! All rays start at the camera center. A vertex is occluded when the open
//! segment from the camera to the vertex crosses a triangle. Triangles are
//! pre-filtered by their bounding box in normalized image coordinates
//! (x/z, y/z): a crossing triangle must contain the vertex's projection.

use crate::{Point3, Vector3};

use super::plane::PlacedObject;

/// Parametric tolerance on the ray segment.
pub const T_EPS: f64 = 1e-9;
/// Hits closer than this to the target vertex do not occlude it.
pub const GRAZE_EPS: f64 = 1e-6;

/// Watertight ray/triangle intersection for a ray from the origin along
/// `dir`. Returns the ray parameter of the hit, if any.
pub fn ray_triangle(dir: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let abs = dir.abs();
    let kz = if abs.x > abs.y {
        if abs.x > abs.z {
            0
        } else {
            2
        }
    } else if abs.y > abs.z {
        1
    } else {
        2
    };
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];

    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
    Some(t)
}

/// Whether a hit at parameter `t` on the segment to `target` counts as occlusion.
fn blocks_at(t: f64, target: &Point3) -> bool {
    t > T_EPS && t < 1.0 && (1.0 - t) * target.coords.norm() > GRAZE_EPS
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Rect {
    const EMPTY: Rect = Rect {
        min_x: f64::INFINITY,
        min_y: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        max_y: f64::NEG_INFINITY,
    };

    fn grow(&mut self, x: f64, y: f64) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    fn union(&mut self, o: &Rect) {
        self.min_x = self.min_x.min(o.min_x);
        self.min_y = self.min_y.min(o.min_y);
        self.max_x = self.max_x.max(o.max_x);
        self.max_y = self.max_y.max(o.max_y);
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        const SLACK: f64 = 1e-9;
        x >= self.min_x - SLACK && x <= self.max_x + SLACK && y >= self.min_y - SLACK && y <= self.max_y + SLACK
    }
}

/// A triangle soup with precomputed screen-space bounds for fast occlusion queries.
#[derive(Clone, Debug)]
pub struct RayMesh {
    tris: Vec<[Point3; 3]>,
    faces: Vec<[usize; 3]>,
    rects: Vec<Rect>,
    bounds: Rect,
    /// Triangles that reach behind the camera; they bypass the screen prefilter.
    unbounded: bool,
}

impl RayMesh {
    pub fn new(vertices: &[Point3], faces: &[[usize; 3]]) -> Self {
        let mut tris = Vec::with_capacity(faces.len());
        let mut rects = Vec::with_capacity(faces.len());
        let mut bounds = Rect::EMPTY;
        let mut unbounded = false;
        for f in faces {
            let tri = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let mut r = Rect::EMPTY;
            if tri.iter().all(|p| p.z > 0.0) {
                for p in &tri {
                    r.grow(p.x / p.z, p.y / p.z);
                }
            } else {
                unbounded = true;
                r = Rect {
                    min_x: f64::NEG_INFINITY,
                    min_y: f64::NEG_INFINITY,
                    max_x: f64::INFINITY,
                    max_y: f64::INFINITY,
                };
            }
            bounds.union(&r);
            tris.push(tri);
            rects.push(r);
        }
        Self {
            tris,
            faces: faces.to_vec(),
            rects,
            bounds,
            unbounded,
        }
    }

    pub fn from_object(obj: &PlacedObject) -> Self {
        Self::new(&obj.vertices, &obj.faces)
    }

    /// Whether the segment from the camera to `target` crosses a triangle,
    /// ignoring triangles for which `skip(face_index)` is true.
    pub fn blocks(&self, target: &Point3, skip: impl Fn(usize) -> bool) -> bool {
        let bounded = target.z > 0.0 && !self.unbounded;
        let (px, py) = if target.z > 0.0 {
            (target.x / target.z, target.y / target.z)
        } else {
            (0.0, 0.0)
        };
        if bounded && !self.bounds.contains(px, py) {
            return false;
        }
        let dir = target.coords;
        self.tris.iter().enumerate().any(|(i, tri)| {
            if target.z > 0.0 && !self.rects[i].contains(px, py) {
                return false;
            }
            if skip(i) {
                return false;
            }
            matches!(ray_triangle(&dir, &tri[0], &tri[1], &tri[2]), Some(t) if blocks_at(t, target))
        })
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }
}

/// Per-vertex self-occlusion flags (`true` = occluded by a face of the same
/// object not incident to that vertex).
pub fn self_occlusion(obj: &PlacedObject) -> Vec<bool> {
    let mesh = RayMesh::from_object(obj);
    self_occlusion_with(obj, &mesh)
}

pub fn self_occlusion_with(obj: &PlacedObject, mesh: &RayMesh) -> Vec<bool> {
    let faces = mesh.faces();
    obj.vertices
        .iter()
        .enumerate()
        .map(|(j, v)| mesh.blocks(v, |f| faces[f].contains(&j)))
        .collect()
}

/// Vertices of `scene[beta]` that are not self-occluded but are hidden by a
/// face of some other object in the scene. Sorted ascending.
pub fn mutual_occlusion(scene: &[PlacedObject], beta: usize) -> Vec<usize> {
    let self_occ = self_occlusion(&scene[beta]);
    let meshes: Vec<RayMesh> = scene
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != beta)
        .map(|(_, o)| RayMesh::from_object(o))
        .collect();
    occluded_by(&scene[beta], &self_occ, &meshes)
}

/// Vertices of `obj` not flagged in `self_occ` that are blocked by any of `occluders`.
pub fn occluded_by(obj: &PlacedObject, self_occ: &[bool], occluders: &[RayMesh]) -> Vec<usize> {
    obj.vertices
        .iter()
        .enumerate()
        .filter(|(j, v)| !self_occ[*j] && occluders.iter().any(|m| m.blocks(v, |_| false)))
        .map(|(j, _)| j)
        .collect()
}

/// The twelve triangles of an axis-aligned box with the given corners.
pub fn box_triangles(min: &Point3, max: &Point3) -> (Vec<Point3>, Vec<[usize; 3]>) {
    let verts = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 1, 3],
        [0, 3, 2], // z = min
        [4, 6, 7],
        [4, 7, 5], // z = max
        [0, 4, 5],
        [0, 5, 1], // y = min
        [2, 3, 7],
        [2, 7, 6], // y = max
        [0, 2, 6],
        [0, 6, 4], // x = min
        [1, 5, 7],
        [1, 7, 3], // x = max
    ];
    (verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn object(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> PlacedObject {
        PlacedObject {
            vertices,
            faces: Arc::from(faces),
            source: 0,
        }
    }

    #[test]
    fn single_triangle_is_fully_visible() {
        let obj = object(
            vec![
                Point3::new(0.0, 0.0, 5.0),
                Point3::new(1.0, 0.0, 5.0),
                Point3::new(0.0, 1.0, 6.0),
            ],
            vec![[0, 1, 2]],
        );
        assert_eq!(self_occlusion(&obj), vec![false; 3]);
    }

    #[test]
    fn cube_far_corners_are_hidden() {
        let (v, f) = box_triangles(&Point3::new(-0.5, -0.5, 9.5), &Point3::new(0.5, 0.5, 10.5));
        let obj = object(v, f);
        let flags = self_occlusion(&obj);
        for (j, p) in obj.vertices.iter().enumerate() {
            assert_eq!(flags[j], p.z > 10.0, "vertex {j} at {p:?}");
        }
    }

    #[test]
    fn watertight_hit_parameter() {
        let t = ray_triangle(
            &Vector3::new(0.0, 0.0, 2.0),
            &Point3::new(-1.0, -1.0, 1.0),
            &Point3::new(1.0, -1.0, 1.0),
            &Point3::new(0.0, 1.0, 1.0),
        );
        assert_eq!(t, Some(0.5));
        let miss = ray_triangle(
            &Vector3::new(5.0, 0.0, 1.0),
            &Point3::new(-1.0, -1.0, 1.0),
            &Point3::new(1.0, -1.0, 1.0),
            &Point3::new(0.0, 1.0, 1.0),
        );
        assert_eq!(miss, None);
    }

    #[test]
    fn hits_at_the_target_do_not_occlude() {
        // A triangle passing through the target vertex itself.
        let mesh = RayMesh::new(
            &[
                Point3::new(-1.0, -1.0, 4.0),
                Point3::new(1.0, -1.0, 4.0),
                Point3::new(0.0, 1.0, 4.0),
            ],
            &[[0, 1, 2]],
        );
        assert!(!mesh.blocks(&Point3::new(0.0, 0.0, 4.0), |_| false));
        assert!(mesh.blocks(&Point3::new(0.0, 0.0, 4.1), |_| false));
        assert!(!mesh.blocks(&Point3::new(0.0, 0.0, 3.9), |_| false));
    }

    #[test]
    fn single_object_scene_has_no_mutual_occlusion() {
        let (v, f) = box_triangles(&Point3::new(-0.5, -0.5, 9.5), &Point3::new(0.5, 0.5, 10.5));
        assert!(mutual_occlusion(&[object(v, f)], 0).is_empty());
    }
}
