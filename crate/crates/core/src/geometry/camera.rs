use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point2, Point3, Vector3};

/// Pinhole camera. Camera frame: +x right, +y up, +z forward; image v grows
/// downward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            fx: 650.0,
            fy: 650.0,
            cx: 400.0,
            cy: 225.0,
            width: 800,
            height: 450,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let inside = (0.0..=self.width as f64).contains(&self.cx) && (0.0..=self.height as f64).contains(&self.cy);
        if self.fx <= 0.0 || self.fy <= 0.0 || !inside {
            return Err(Error::Params("camera intrinsics out of range".into()));
        }
        Ok(())
    }

    pub fn project_point(&self, p: &Point3) -> Result<Point2> {
        if p.z <= 0.0 {
            return Err(Error::Projection(p.z));
        }
        Ok(Point2::new(
            self.fx * p.x / p.z + self.cx,
            -self.fy * p.y / p.z + self.cy,
        ))
    }

    pub fn project(&self, points: &[Point3]) -> Result<Vec<Point2>> {
        points.iter().map(|p| self.project_point(p)).collect()
    }

    /// Direction (not normalized, unit depth) of the ray through pixel `uv`.
    pub fn pixel_ray(&self, uv: &Point2) -> Vector3 {
        Vector3::new((uv.x - self.cx) / self.fx, -(uv.y - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, uv: &Point2) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= self.width as f64 && uv.y <= self.height as f64
    }
}

/// Axis-aligned image box in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox2 {
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
}

impl BBox2 {
    pub fn new(min_u: f64, min_v: f64, max_u: f64, max_v: f64) -> Self {
        Self {
            min_u,
            min_v,
            max_u,
            max_v,
        }
    }

    pub fn from_center(center: Point2, width: f64, height: f64) -> Self {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    /// Tight box around `points`; `None` for an empty slice.
    pub fn from_points(points: &[Point2]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Self::new(first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            b.min_u = b.min_u.min(p.x);
            b.min_v = b.min_v.min(p.y);
            b.max_u = b.max_u.max(p.x);
            b.max_v = b.max_v.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max_u - self.min_u
    }

    pub fn height(&self) -> f64 {
        self.max_v - self.min_v
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.min_u + self.max_u) / 2.0, (self.min_v + self.max_v) / 2.0)
    }

    pub fn iou(&self, other: &BBox2) -> f64 {
        let w = self.max_u.min(other.max_u) - self.min_u.max(other.min_u);
        let h = self.max_v.min(other.max_v) - self.min_v.max(other.min_v);
        if w <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        let inter = w * h;
        inter / (self.area() + other.area() - inter)
    }
}

/// Unit ray through the center of `bbox`.
pub fn lift_bbox_ray(cam: &Camera, bbox: &BBox2) -> Result<Unit<Vector3>> {
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(Error::DegenerateBox);
    }
    Ok(Unit::new_normalize(cam.pixel_ray(&bbox.center())))
}
