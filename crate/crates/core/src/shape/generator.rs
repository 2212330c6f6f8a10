//! Procedural car wireframes used as training exemplars.
//!
//! Each car is six cross-section rings of six vertices, ordered front to
//! rear: front face, hood front edge, windshield base, roof front, roof rear
//! and rear face. A ring runs right-bottom, right-belt, right-top, left-top,
//! left-belt, left-bottom. Adjacent rings are joined by quads and both ends
//! are capped, giving a closed 68-triangle mesh.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExemplarSet, WireframeExemplar};
use crate::Point3;

pub const CAR_PART_COUNT: usize = 36;
const RING: usize = 6;
const STATIONS: usize = 6;

const STATION_NAMES: [&str; STATIONS] = [
    "front",
    "hood_front",
    "windshield_base",
    "roof_front",
    "roof_rear",
    "rear",
];
const RING_NAMES: [&str; RING] = [
    "right_bottom",
    "right_belt",
    "right_top",
    "left_top",
    "left_belt",
    "left_bottom",
];

/// Dimensions of one procedural car, in meters and body-length fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarParams {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub hood_height: f64,
    pub clearance: f64,
    pub belt_height: f64,
    /// Windshield base, as a fraction of length from the front.
    pub cabin_start: f64,
    /// Windshield length along the body, as a fraction of length.
    pub windshield: f64,
    /// Rear end of the roof, as a fraction of length from the front.
    pub cabin_end: f64,
    pub trunk_height: f64,
    pub roof_taper: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        Self {
            length: 4.3,
            width: 1.75,
            height: 1.5,
            hood_height: 0.95,
            clearance: 0.18,
            belt_height: 0.62,
            cabin_start: 0.32,
            windshield: 0.15,
            cabin_end: 0.8,
            trunk_height: 1.05,
            roof_taper: 0.16,
        }
    }
}

/// Samples [`CarParams`] covering hatchbacks, sedans and wagons.
#[derive(Clone, Debug)]
pub struct CarGenerator {
    rng: ChaCha8Rng,
}

impl CarGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample_params(&mut self) -> CarParams {
        let r = &mut self.rng;
        let length = r.random_range(3.7..4.9);
        let width = r.random_range(1.62..1.88);
        let height = r.random_range(1.38..1.62);
        let hood_height = r.random_range(0.88..1.02);
        let cabin_end: f64 = r.random_range(0.72..0.92);
        let hatchiness = ((cabin_end - 0.72) / 0.2 + r.random_range(-0.15..0.15)).clamp(0.0, 1.0);
        let trunk_lo = hood_height + 0.05;
        let trunk_hi = height - 0.3;
        CarParams {
            length,
            width,
            height,
            hood_height,
            clearance: r.random_range(0.14..0.22),
            belt_height: r.random_range(0.55..0.68),
            cabin_start: r.random_range(0.28..0.36),
            windshield: r.random_range(0.12..0.18),
            cabin_end,
            trunk_height: trunk_lo + (trunk_hi - trunk_lo) * hatchiness,
            roof_taper: r.random_range(0.12..0.2),
        }
    }
}

/// Vertex names in index order.
pub fn car_part_names() -> Vec<String> {
    STATION_NAMES
        .iter()
        .flat_map(|s| RING_NAMES.iter().map(move |r| format!("{s}_{r}")))
        .collect()
}

/// Closed triangle topology shared by every generated car.
pub fn car_faces() -> Vec<[usize; 3]> {
    let idx = |s: usize, k: usize| s * RING + k % RING;
    let mut faces = Vec::with_capacity(68);
    for s in 0..STATIONS - 1 {
        for k in 0..RING {
            faces.push([idx(s, k), idx(s, k + 1), idx(s + 1, k + 1)]);
            faces.push([idx(s, k), idx(s + 1, k + 1), idx(s + 1, k)]);
        }
    }
    for s in [0, STATIONS - 1] {
        for k in 1..RING - 1 {
            faces.push([idx(s, 0), idx(s, k), idx(s, k + 1)]);
        }
    }
    faces
}

/// Builds the 36 vertices of a car, centered on the vertex centroid.
pub fn car_vertices(p: &CarParams) -> Vec<Point3> {
    let half_w = p.width / 2.0;
    let front = p.length / 2.0;
    let at = |f: f64| front - f * p.length;
    // (x, bottom y, belt y, top y, bottom/belt half-width, top half-width)
    let stations = [
        (
            front,
            p.clearance + 0.08,
            p.belt_height - 0.04,
            p.hood_height - 0.1,
            half_w - 0.08,
            half_w - 0.12,
        ),
        (
            at(0.06),
            p.clearance,
            p.belt_height,
            p.hood_height,
            half_w,
            half_w - 0.06,
        ),
        (
            at(p.cabin_start),
            p.clearance,
            p.belt_height,
            p.hood_height + 0.05,
            half_w,
            half_w - 0.08,
        ),
        (
            at(p.cabin_start + p.windshield),
            p.clearance,
            p.belt_height,
            p.height,
            half_w,
            half_w - p.roof_taper,
        ),
        (
            at(p.cabin_end),
            p.clearance,
            p.belt_height,
            p.height,
            half_w,
            half_w - p.roof_taper,
        ),
        (
            -front,
            p.clearance + 0.08,
            p.belt_height,
            p.trunk_height,
            half_w - 0.08,
            half_w - 0.12,
        ),
    ];
    let mut verts = Vec::with_capacity(CAR_PART_COUNT);
    for (x, bottom, belt, top, side_hw, top_hw) in stations {
        // +z is the car's left side.
        verts.push(Point3::new(x, bottom, -side_hw));
        verts.push(Point3::new(x, belt, -side_hw));
        verts.push(Point3::new(x, top, -top_hw));
        verts.push(Point3::new(x, top, top_hw));
        verts.push(Point3::new(x, belt, side_hw));
        verts.push(Point3::new(x, bottom, side_hw));
    }
    let n = verts.len() as f64;
    let centroid = verts.iter().fold(nalgebra::Vector3::zeros(), |acc, v| acc + v.coords) / n;
    verts.iter().map(|v| v - centroid).collect()
}

/// Generates `count` procedural car exemplars with ids `car_000`, `car_001`, ...
pub fn generate_exemplars(count: usize, seed: u64) -> ExemplarSet {
    let mut gen = CarGenerator::new(seed);
    let faces = car_faces();
    let exemplars = (0..count)
        .map(|i| WireframeExemplar {
            id: format!("car_{i:03}"),
            vertices: car_vertices(&gen.sample_params()),
            faces: faces.clone(),
        })
        .collect();
    ExemplarSet {
        part_names: car_part_names(),
        exemplars,
    }
}
