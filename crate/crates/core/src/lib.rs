//! Monocular multi-object 3D scene inference with deformable wireframe cars.
//!
//! The crate fits several PCA wireframe car models, resting on a shared
//! ground plane and reasoning about part-level occlusion, to per-part
//! response maps. See the README for the coordinate conventions and the
//! command line workflow.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod evidence;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod masks;
pub mod render;
pub mod shape;

pub use error::{Error, Result};

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
