use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3 as V3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{ground_contact, ShapeCoefficients, ShapeSpace};
use crate::{Point3, Vector3};

/// Sanity bound on ground plane pitch and roll.
pub const MAX_TILT: f64 = 0.35;

/// Ground plane relative to the camera: pitch about the camera x axis, roll
/// about the camera z axis, and the camera height above the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub pitch: f64,
    pub roll: f64,
    pub cam_height: f64,
}

impl GroundPlane {
    pub fn flat(cam_height: f64) -> Self {
        Self {
            pitch: 0.0,
            roll: 0.0,
            cam_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pitch.abs() >= MAX_TILT || self.roll.abs() >= MAX_TILT || self.cam_height <= 0.0 {
            return Err(Error::Params(format!("ground plane out of range: {self:?}")));
        }
        Ok(())
    }

    /// Rotation taking ground-frame directions into the camera frame.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&V3::x_axis(), self.pitch) * Rotation3::from_axis_angle(&V3::z_axis(), self.roll)
    }

    /// Ground frame: origin on the plane directly below the camera, +y along
    /// the plane normal, +z forward.
    pub fn ground_to_camera(&self, g: &Point3) -> Point3 {
        let shifted = g - Vector3::new(0.0, self.cam_height, 0.0);
        Point3::from(self.rotation() * shifted.coords)
    }

    pub fn camera_to_ground(&self, c: &Point3) -> Point3 {
        let g = self.rotation().inverse() * c.coords;
        Point3::from(g + Vector3::new(0.0, self.cam_height, 0.0))
    }

    /// Plane normal (pointing up) in camera coordinates.
    pub fn normal(&self) -> Vector3 {
        self.rotation() * Vector3::y()
    }
}

/// Position and heading of an object on its ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub x: f64,
    pub z: f64,
    /// Heading about the plane normal; 0 points the car's front along +z
    /// (rear toward the camera), +pi/2 along +x.
    pub azimuth: f64,
}

impl ObjectPose {
    pub fn new(x: f64, z: f64, azimuth: f64) -> Self {
        Self {
            x,
            z,
            azimuth: wrap_angle(azimuth),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Absolute angular difference in [0, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// A wireframe instance expressed in camera coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedObject {
    pub vertices: Vec<Point3>,
    pub faces: Arc<[[usize; 3]]>,
    /// Index of the hypothesis this object came from.
    pub source: usize,
}

impl PlacedObject {
    pub fn centroid(&self) -> Point3 {
        let n = self.vertices.len() as f64;
        Point3::from(self.vertices.iter().fold(Vector3::zeros(), |a, v| a + v.coords) / n)
    }
}

/// Object-frame to ground-frame rotation at the given heading. Object axes
/// (+x forward, +y up, +z left) map to ground (+z, +y, -x) at heading 0.
fn object_rotation(azimuth: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = azimuth.sin_cos();
    let heading = nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    let axes = nalgebra::Matrix3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
    heading * axes
}

/// Places an object-frame wireframe so that its ground contact rests on the
/// plane at `(pose.x, pose.z)`, returning camera-frame vertices.
pub fn place_wireframe(wireframe: &[Point3], pose: &ObjectPose, gp: &GroundPlane) -> Vec<Point3> {
    let lift = -ground_contact(wireframe);
    let rot = object_rotation(pose.azimuth);
    let offset = Vector3::new(pose.x, lift, pose.z);
    let cam_rot = gp.rotation();
    let cam_shift = Vector3::new(0.0, gp.cam_height, 0.0);
    wireframe
        .iter()
        .map(|o| Point3::from(cam_rot * (rot * o.coords + offset - cam_shift)))
        .collect()
}

/// Inverse of [`place_wireframe`] for a known ground contact height.
pub fn unplace_wireframe(vertices: &[Point3], contact: f64, pose: &ObjectPose, gp: &GroundPlane) -> Vec<Point3> {
    let rot_t = object_rotation(pose.azimuth).transpose();
    let offset = Vector3::new(pose.x, -contact, pose.z);
    vertices
        .iter()
        .map(|c| Point3::from(rot_t * (gp.camera_to_ground(c).coords - offset)))
        .collect()
}

/// Instantiates the shape and places it on the ground plane.
pub fn place_object(
    space: &ShapeSpace,
    s: &ShapeCoefficients,
    pose: &ObjectPose,
    gp: &GroundPlane,
) -> Result<PlacedObject> {
    let wire = space.instantiate(s)?;
    let vertices = place_wireframe(&wire, pose, gp);
    if vertices.iter().all(|v| v.z <= 0.0) {
        return Err(Error::Placement("object lies entirely behind the camera".into()));
    }
    Ok(PlacedObject {
        vertices,
        faces: space.faces.clone(),
        source: 0,
    })
}
