//! Synthetic ground-truth scenes standing in for annotated street imagery.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    box_triangles, occluded_by, place_object, self_occlusion, wrap_angle, BBox2, Camera, GroundPlane, ObjectPose,
    PlacedObject, RayMesh,
};
use crate::masks::PartState;
use crate::shape::{ShapeCoefficients, ShapeSpace};
use crate::{Point2, Point3};

/// Number of discrete viewpoint bins; bin `k` is centered on an apparent
/// azimuth of `k * 45` degrees.
pub const VIEWPOINT_BINS: u8 = 8;

/// Bearing of the ground point `(x, z)` seen from the camera.
pub fn bearing(x: f64, z: f64) -> f64 {
    x.atan2(z)
}

/// Azimuth relative to the viewing ray, i.e. the orientation as it appears in the image.
pub fn apparent_azimuth(pose: &ObjectPose) -> f64 {
    wrap_angle(pose.azimuth - bearing(pose.x, pose.z))
}

pub fn viewpoint_bin(apparent: f64) -> u8 {
    let step = 2.0 * PI / VIEWPOINT_BINS as f64;
    ((wrap_angle(apparent) / step).round() as i64).rem_euclid(VIEWPOINT_BINS as i64) as u8
}

pub fn bin_center(bin: u8) -> f64 {
    wrap_angle(bin as f64 * 2.0 * PI / VIEWPOINT_BINS as f64)
}

/// An axis-aligned box in the ground frame (origin below the camera, +y up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccluderBox {
    pub min: Point3,
    pub max: Point3,
}

impl OccluderBox {
    pub fn mesh(&self, gp: &GroundPlane) -> RayMesh {
        let (verts, faces) = box_triangles(&self.min, &self.max);
        let cam: Vec<Point3> = verts.iter().map(|v| gp.ground_to_camera(v)).collect();
        RayMesh::new(&cam, &faces)
    }

    /// Tight image box of the projected corners; `None` if any corner is behind the camera.
    pub fn image_box(&self, gp: &GroundPlane, cam: &Camera) -> Option<BBox2> {
        let (verts, _) = box_triangles(&self.min, &self.max);
        let px: Option<Vec<Point2>> = verts
            .iter()
            .map(|v| cam.project_point(&gp.ground_to_camera(v)).ok())
            .collect();
        BBox2::from_points(&px?)
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            center: [(self.min.x + self.max.x) / 2.0, (self.min.z + self.max.z) / 2.0],
            half: [(self.max.x - self.min.x) / 2.0, (self.max.z - self.min.z) / 2.0],
            angle: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub pose: ObjectPose,
    pub shape: ShapeCoefficients,
    /// Unmodeled occluders placed with this object.
    pub occluders: Vec<OccluderBox>,
    pub parts_px: Vec<Point2>,
    /// Ground-truth state per part; `MaskOccluded` marks parts hidden by
    /// another object or an occluder box.
    pub states: Vec<PartState>,
    pub bbox: BBox2,
    pub centroid: Point3,
    pub viewpoint: u8,
}

impl GtObject {
    pub fn occluded_count(&self) -> usize {
        self.states.iter().filter(|s| **s == PartState::MaskOccluded).count()
    }

    pub fn visible_fraction(&self) -> f64 {
        let visible = self.states.iter().filter(|s| **s == PartState::Visible).count();
        let m = self.states.iter().filter(|s| **s != PartState::SelfOccluded).count();
        if m == 0 {
            0.0
        } else {
            visible as f64 / m as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScene {
    pub id: String,
    pub camera: Camera,
    pub ground_plane: GroundPlane,
    pub objects: Vec<GtObject>,
}

impl GroundTruthScene {
    pub fn occluders(&self) -> impl Iterator<Item = &OccluderBox> {
        self.objects.iter().flat_map(|o| o.occluders.iter())
    }

    pub fn placed_objects(&self, space: &ShapeSpace) -> Result<Vec<PlacedObject>> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut p = place_object(space, &o.shape, &o.pose, &self.ground_plane)?;
                p.source = i;
                Ok(p)
            })
            .collect()
    }

    /// Rebuilds every derived field (pixels, labels, boxes, bins) from poses,
    /// shapes and occluders.
    pub fn derive(&mut self, space: &ShapeSpace) -> Result<()> {
        let placed = self.placed_objects(space)?;
        let meshes: Vec<RayMesh> = placed.iter().map(RayMesh::from_object).collect();
        let boxes: Vec<RayMesh> = self.occluders().map(|b| b.mesh(&self.ground_plane)).collect();
        for (i, (obj, gt)) in placed.iter().zip(self.objects.iter_mut()).enumerate() {
            let self_occ = self_occlusion(obj);
            let others: Vec<RayMesh> = meshes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, m)| m.clone())
                .chain(boxes.iter().cloned())
                .collect();
            let hidden = occluded_by(obj, &self_occ, &others);
            gt.states = self_occ
                .iter()
                .map(|&so| {
                    if so {
                        PartState::SelfOccluded
                    } else {
                        PartState::Visible
                    }
                })
                .collect();
            for j in hidden {
                gt.states[j] = PartState::MaskOccluded;
            }
            gt.parts_px = self.camera.project(&obj.vertices)?;
            gt.bbox = BBox2::from_points(&gt.parts_px).ok_or(Error::DegenerateBox)?;
            gt.centroid = obj.centroid();
            gt.viewpoint = viewpoint_bin(apparent_azimuth(&gt.pose));
        }
        Ok(())
    }
}

/// Sampling ranges for synthetic scenes. Ranges are inclusive `[lo, hi]`;
/// `lo == hi` pins the value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub camera: Camera,
    pub cam_height: f64,
    pub objects: [usize; 2],
    pub pitch_deg: [f64; 2],
    pub roll_deg: [f64; 2],
    pub depth: [f64; 2],
    pub lateral: [f64; 2],
    pub azimuth_deg: [f64; 2],
    /// Shape coefficients are standard normal clamped to this bound.
    pub shape_limit: f64,
    /// Probability that an object gets an unmodeled occluder in front of it.
    pub occluder_prob: f64,
    pub occluder_width: [f64; 2],
    pub occluder_height: [f64; 2],
    pub occluder_gap: [f64; 2],
    pub occluder_thickness: f64,
    /// Minimum clearance between footprints, meters.
    pub footprint_margin: f64,
    pub min_height_px: f64,
    pub min_visible_fraction: f64,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            camera: Camera::default(),
            cam_height: 1.65,
            objects: [2, 4],
            // Within the coarse lifting grid, so particles cover the true plane.
            pitch_deg: [-1.0, 1.0],
            roll_deg: [-0.5, 0.5],
            depth: [7.0, 18.0],
            lateral: [-4.5, 4.5],
            azimuth_deg: [-180.0, 180.0],
            shape_limit: 1.5,
            occluder_prob: 0.4,
            occluder_width: [0.3, 2.0],
            occluder_height: [0.7, 1.5],
            occluder_gap: [0.8, 3.0],
            occluder_thickness: 0.3,
            footprint_margin: 0.4,
            min_height_px: 50.0,
            min_visible_fraction: 0.2,
            max_attempts: 2000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let ranges = [
            ("pitch_deg", self.pitch_deg),
            ("roll_deg", self.roll_deg),
            ("depth", self.depth),
            ("lateral", self.lateral),
            ("azimuth_deg", self.azimuth_deg),
            ("occluder_width", self.occluder_width),
            ("occluder_height", self.occluder_height),
            ("occluder_gap", self.occluder_gap),
        ];
        for (name, r) in ranges {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::Params(format!("{name} range is empty")));
            }
        }
        if self.objects[0] == 0 || self.objects[0] > self.objects[1] {
            return Err(Error::Params("object count range must be within 1..".into()));
        }
        if self.depth[0] <= 0.0 || self.cam_height <= 0.0 || self.max_attempts == 0 {
            return Err(Error::Params(
                "depth, camera height and attempts must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.occluder_prob) || self.shape_limit < 0.0 {
            return Err(Error::Params("occluder probability or shape limit out of range".into()));
        }
        Ok(())
    }
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Oriented rectangle on the ground.
#[derive(Clone, Copy, Debug)]
struct Footprint {
    center: [f64; 2],
    half: [f64; 2],
    angle: f64,
}

impl Footprint {
    fn axes(&self) -> [[f64; 2]; 2] {
        // Ground heading: the length axis points along (sin az, cos az) in (x, z).
        let (s, c) = self.angle.sin_cos();
        [[s, c], [c, -s]]
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        let [a, b] = self.axes();
        let mut out = [[0.0; 2]; 4];
        for (k, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)].iter().enumerate() {
            out[k] = [
                self.center[0] + sa * self.half[0] * a[0] + sb * self.half[1] * b[0],
                self.center[1] + sa * self.half[0] * a[1] + sb * self.half[1] * b[1],
            ];
        }
        out
    }

    fn overlaps(&self, other: &Footprint, margin: f64) -> bool {
        let (ca, cb) = (self.corners(), other.corners());
        for axis in self.axes().iter().chain(other.axes().iter()) {
            let proj = |cs: &[[f64; 2]; 4]| {
                cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = p[0] * axis[0] + p[1] * axis[1];
                    (lo.min(d), hi.max(d))
                })
            };
            let (a0, a1) = proj(&ca);
            let (b0, b1) = proj(&cb);
            if a1 + margin < b0 || b1 + margin < a0 {
                return false;
            }
        }
        true
    }
}

fn car_footprint(wire: &[Point3], pose: &ObjectPose) -> Footprint {
    let (mut lx, mut lz) = (0.0f64, 0.0f64);
    for v in wire {
        lx = lx.max(v.x.abs());
        lz = lz.max(v.z.abs());
    }
    Footprint {
        center: [pose.x, pose.z],
        half: [lx, lz],
        angle: pose.azimuth,
    }
}

/// Samples a scene satisfying the visibility floors of `config`.
pub fn synth_scene(config: &SynthConfig, space: &ShapeSpace, seed: u64, id: &str) -> Result<GroundTruthScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_attempts {
        if let Some(scene) = try_scene(config, space, &mut rng, id)? {
            return Ok(scene);
        }
    }
    Err(Error::SynthFailure(config.max_attempts))
}

fn try_scene(
    config: &SynthConfig,
    space: &ShapeSpace,
    rng: &mut ChaCha8Rng,
    id: &str,
) -> Result<Option<GroundTruthScene>> {
    let cam = &config.camera;
    let gp = GroundPlane {
        pitch: uniform(rng, config.pitch_deg).to_radians(),
        roll: uniform(rng, config.roll_deg).to_radians(),
        cam_height: config.cam_height,
    };
    let n = rng.random_range(config.objects[0]..=config.objects[1]);
    let mut objects: Vec<GtObject> = Vec::with_capacity(n);
    let mut footprints: Vec<Footprint> = Vec::new();
    for _ in 0..n {
        let mut placed = None;
        for _ in 0..50 {
            let pose = ObjectPose::new(
                uniform(rng, config.lateral),
                uniform(rng, config.depth),
                uniform(rng, config.azimuth_deg).to_radians(),
            );
            let coeffs: Vec<f64> = (0..space.rank())
                .map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    g.clamp(-config.shape_limit, config.shape_limit)
                })
                .collect();
            let shape = ShapeCoefficients(coeffs);
            let wire = space.instantiate(&shape)?;
            let fp = car_footprint(&wire, &pose);
            if footprints.iter().any(|f| f.overlaps(&fp, config.footprint_margin)) {
                continue;
            }
            let obj = place_object(space, &shape, &pose, &gp)?;
            if obj.vertices.iter().any(|v| v.z <= 0.5) {
                continue;
            }
            let px = cam.project(&obj.vertices)?;
            let bbox = BBox2::from_points(&px).ok_or(Error::DegenerateBox)?;
            let inside = bbox.min_u >= 0.0
                && bbox.min_v >= 0.0
                && bbox.max_u <= cam.width as f64
                && bbox.max_v <= cam.height as f64;
            if !inside || bbox.height() < config.min_height_px {
                continue;
            }
            placed = Some((pose, shape, fp, bbox));
            break;
        }
        let Some((pose, shape, fp, bbox)) = placed else {
            return Ok(None);
        };
        footprints.push(fp);
        objects.push(GtObject {
            pose,
            shape,
            occluders: Vec::new(),
            parts_px: Vec::new(),
            states: Vec::new(),
            bbox,
            centroid: Point3::origin(),
            viewpoint: 0,
        });
    }
    for i in 0..objects.len() {
        if rng.random::<f64>() >= config.occluder_prob {
            continue;
        }
        let near_z = footprints[i]
            .corners()
            .iter()
            .map(|c| c[1])
            .fold(f64::INFINITY, f64::min);
        let bbox = objects[i].bbox;
        for _ in 0..20 {
            let gap = uniform(rng, config.occluder_gap);
            let z_far = near_z - gap;
            let z_near = z_far - config.occluder_thickness;
            if z_near < 1.0 {
                continue;
            }
            let u = bbox.min_u + rng.random::<f64>() * bbox.width();
            let zc = (z_near + z_far) / 2.0;
            let xc = (u - cam.cx) / cam.fx * zc;
            let w = uniform(rng, config.occluder_width);
            let h = uniform(rng, config.occluder_height);
            let candidate = OccluderBox {
                min: Point3::new(xc - w / 2.0, 0.0, z_near),
                max: Point3::new(xc + w / 2.0, h, z_far),
            };
            let fp = candidate.footprint();
            if footprints.iter().any(|f| f.overlaps(&fp, 0.2)) {
                continue;
            }
            if candidate.image_box(&gp, cam).is_none() {
                continue;
            }
            footprints.push(fp);
            objects[i].occluders.push(candidate);
            break;
        }
    }
    let mut scene = GroundTruthScene {
        id: id.to_string(),
        camera: *cam,
        ground_plane: gp,
        objects,
    };
    scene.derive(space)?;
    if scene
        .objects
        .iter()
        .any(|o| o.visible_fraction() < config.min_visible_fraction)
    {
        return Ok(None);
    }
    Ok(Some(scene))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{fit_shape_space, generate_exemplars};

    fn space() -> ShapeSpace {
        fit_shape_space(&generate_exemplars(20, 3).exemplars, 4).unwrap()
    }

    #[test]
    fn bins_round_to_nearest_center() {
        assert_eq!(viewpoint_bin(0.0), 0);
        assert_eq!(viewpoint_bin(PI), 4);
        assert_eq!(viewpoint_bin(-PI / 4.0), 7);
        assert_eq!(viewpoint_bin(0.4), 1);
        assert!((bin_center(7) + PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_overlap() {
        let a = Footprint {
            center: [0.0, 10.0],
            half: [2.0, 0.9],
            angle: 0.0,
        };
        let b = Footprint {
            center: [1.5, 10.0],
            half: [2.0, 0.9],
            angle: 0.0,
        };
        let c = Footprint {
            center: [3.0, 10.0],
            half: [2.0, 0.9],
            angle: 0.0,
        };
        assert!(a.overlaps(&b, 0.0));
        assert!(!a.overlaps(&c, 0.5));
        assert!(a.overlaps(&c, 1.5));
    }

    #[test]
    fn pinned_ranges_give_the_specified_scene() {
        let sp = space();
        let cfg = SynthConfig {
            objects: [1, 1],
            pitch_deg: [0.0, 0.0],
            roll_deg: [0.0, 0.0],
            depth: [11.0, 11.0],
            lateral: [0.5, 0.5],
            azimuth_deg: [30.0, 30.0],
            shape_limit: 0.0,
            occluder_prob: 0.0,
            ..SynthConfig::default()
        };
        let s = synth_scene(&cfg, &sp, 9, "pinned").unwrap();
        assert_eq!(s.objects.len(), 1);
        let o = &s.objects[0];
        assert_eq!(o.pose, ObjectPose::new(0.5, 11.0, 30f64.to_radians()));
        assert!(o.shape.0.iter().all(|&c| c == 0.0));
        assert_eq!(s.ground_plane, GroundPlane::flat(1.65));
        assert!(o.states.iter().all(|s| *s != PartState::MaskOccluded));
    }

    #[test]
    fn same_seed_same_scene() {
        let sp = space();
        let cfg = SynthConfig::default();
        assert_eq!(
            synth_scene(&cfg, &sp, 4, "a").unwrap(),
            synth_scene(&cfg, &sp, 4, "a").unwrap()
        );
    }

    #[test]
    fn impossible_config_fails_after_retries() {
        let sp = space();
        let cfg = SynthConfig {
            depth: [200.0, 200.0],
            max_attempts: 3,
            ..SynthConfig::default()
        };
        assert!(matches!(synth_scene(&cfg, &sp, 1, "x"), Err(Error::SynthFailure(3))));
    }
}
