//! Camera model, ground-plane placement and ray-cast visibility.
//!
//! Conventions: the camera sits at the origin looking along +z with +y up
//! and +x right; image v grows downward.

pub mod camera;
pub mod plane;
pub mod raycast;

pub use camera::{lift_bbox_ray, BBox2, Camera};
pub use plane::{
    angle_diff, place_object, place_wireframe, unplace_wireframe, wrap_angle, GroundPlane, ObjectPose, PlacedObject,
    MAX_TILT,
};
pub use raycast::{
    box_triangles, mutual_occlusion, occluded_by, ray_triangle, self_occlusion, self_occlusion_with, RayMesh,
};
