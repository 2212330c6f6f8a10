//! Oracle response maps and pre-detections rendered from a ground-truth scene.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox2;
use crate::masks::PartState;

use super::stack::{PyramidSpec, ResponseStack, ScaleLevel};
use super::synth::{GroundTruthScene, VIEWPOINT_BINS};

/// Parameters of the synthetic part detector. Distances are in map cells of
/// the level a bump is drawn on unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub peak: f64,
    pub sigma: f64,
    /// Value of the background map and of part maps away from any bump.
    pub floor: f64,
    /// Standard deviation of multiplicative log-normal noise on part maps.
    pub floor_noise: f64,
    /// Expected distractor bumps per part map per 10,000 cells.
    pub clutter_density: f64,
    /// Distractor heights are `peak * U(lo, hi)`.
    pub clutter_peak: [f64; 2],
    /// Expected distractor bumps per part map inside each occluder box.
    pub occluder_clutter: f64,
    /// Standard deviation of the bump center offset, image pixels.
    pub location_noise_px: f64,
    /// Probability that a visible part produces no response.
    pub miss_prob: f64,
    /// True-part heights are `peak * U(1 - peak_jitter, 1)`.
    pub peak_jitter: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        // Exact binary fractions keep log(1 + peak/floor) exact in f32 maps.
        Self {
            peak: 1.0,
            sigma: 1.5,
            floor: 0.0625,
            floor_noise: 0.0,
            clutter_density: 0.0,
            clutter_peak: [0.25, 1.0],
            occluder_clutter: 0.0,
            location_noise_px: 0.0,
            miss_prob: 0.0,
            peak_jitter: 0.0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.peak > 0.0
            && self.sigma > 0.0
            && self.floor > 0.0
            && self.floor_noise >= 0.0
            && self.clutter_density >= 0.0
            && self.occluder_clutter >= 0.0
            && self.location_noise_px >= 0.0
            && (0.0..=1.0).contains(&self.miss_prob)
            && (0.0..=1.0).contains(&self.peak_jitter)
            && self.clutter_peak[0] >= 0.0
            && self.clutter_peak[0] <= self.clutter_peak[1];
        if ok {
            Ok(())
        } else {
            Err(Error::Params(format!("invalid noise parameters: {self:?}")))
        }
    }
}

/// Bump profile at map-node offset `(dx, dy)` from the bump center. The
/// corners of the cell holding the center get the full peak, so bilinear
/// lookup at the center returns it exactly; other nodes fall off as a
/// Gaussian of their distance.
pub fn bump_value(peak: f64, sigma: f64, dx: f64, dy: f64) -> f64 {
    if dx.abs() < 1.0 && dy.abs() < 1.0 {
        peak
    } else {
        peak * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    }
}

fn draw_bump(level: &mut ScaleLevel, map: usize, x: f64, y: f64, peak: f64, sigma: f64, floor: f64) {
    let (w, h) = (level.info.width as i64, level.info.height as i64);
    let r = (4.0 * sigma).max(1.5);
    let x0 = ((x - r).floor() as i64).max(0);
    let x1 = ((x + r).ceil() as i64).min(w - 1);
    let y0 = ((y - r).floor() as i64).max(0);
    let y1 = ((y + r).ceil() as i64).min(h - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let data = level.map_mut(map);
    for yy in y0..=y1 {
        for xx in x0..=x1 {
            let v = (floor + bump_value(peak, sigma, xx as f64 - x, yy as f64 - y)) as f32;
            let cell = &mut data[(yy * w + xx) as usize];
            if v > *cell {
                *cell = v;
            }
        }
    }
}

/// Renders per-part response maps: every visible ground-truth part adds a
/// bump on its own map at the level matching its object's height; occluded
/// and self-occluded parts add nothing. Bumps combine by maximum over the
/// floor.
pub fn render_response_stack(
    scene: &GroundTruthScene,
    parts: usize,
    noise: &NoiseParams,
    pyramid: &PyramidSpec,
    seed: u64,
) -> Result<ResponseStack> {
    noise.validate()?;
    for o in &scene.objects {
        if o.states.len() != parts || o.parts_px.len() != parts {
            return Err(Error::Topology("scene part count does not match".into()));
        }
    }
    let floor = noise.floor as f32;
    let mut stack = ResponseStack::new(parts, scene.camera.width, scene.camera.height, *pyramid, floor, floor);
    let occluder_boxes: Vec<(usize, BBox2)> = scene
        .objects
        .iter()
        .enumerate()
        .flat_map(|(i, o)| {
            o.occluders
                .iter()
                .filter_map(move |b| b.image_box(&scene.ground_plane, &scene.camera).map(|bb| (i, bb)))
        })
        .collect();
    let object_levels: Vec<usize> = scene
        .objects
        .iter()
        .map(|o| pyramid.level_for_height(o.bbox.height()))
        .collect();

    stack.levels.par_iter_mut().enumerate().for_each(|(l, level)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(l as u64 + 1);
        let cell = level.info.cell;
        let loc = Normal::new(0.0, noise.location_noise_px.max(0.0)).unwrap();
        for (o, &ol) in scene.objects.iter().zip(&object_levels) {
            if ol != l {
                continue;
            }
            for (j, (px, state)) in o.parts_px.iter().zip(&o.states).enumerate() {
                if *state != PartState::Visible {
                    continue;
                }
                if noise.miss_prob > 0.0 && rng.random::<f64>() < noise.miss_prob {
                    continue;
                }
                let (mut u, mut v) = (px.x, px.y);
                if noise.location_noise_px > 0.0 {
                    u += loc.sample(&mut rng);
                    v += loc.sample(&mut rng);
                }
                let peak = if noise.peak_jitter > 0.0 {
                    noise.peak * (1.0 - noise.peak_jitter * rng.random::<f64>())
                } else {
                    noise.peak
                };
                draw_bump(level, j, u / cell, v / cell, peak, noise.sigma, noise.floor);
            }
        }
        let clutter_peak = |rng: &mut ChaCha8Rng| {
            let [lo, hi] = noise.clutter_peak;
            noise.peak * if hi > lo { rng.random_range(lo..=hi) } else { lo }
        };
        if noise.occluder_clutter > 0.0 {
            let pois = Poisson::new(noise.occluder_clutter).unwrap();
            for (owner, bb) in &occluder_boxes {
                if object_levels[*owner] != l {
                    continue;
                }
                for j in 0..parts {
                    let k: f64 = pois.sample(&mut rng);
                    for _ in 0..k as usize {
                        let u = bb.min_u + rng.random::<f64>() * bb.width();
                        let v = bb.min_v + rng.random::<f64>() * bb.height();
                        let p = clutter_peak(&mut rng);
                        draw_bump(level, j, u / cell, v / cell, p, noise.sigma, noise.floor);
                    }
                }
            }
        }
        if noise.clutter_density > 0.0 {
            let cells = (level.info.width * level.info.height) as f64;
            let pois = Poisson::new(noise.clutter_density * cells / 1e4).unwrap();
            for j in 0..parts {
                let k: f64 = pois.sample(&mut rng);
                for _ in 0..k as usize {
                    let x = rng.random::<f64>() * (level.info.width - 1) as f64;
                    let y = rng.random::<f64>() * (level.info.height - 1) as f64;
                    let p = clutter_peak(&mut rng);
                    draw_bump(level, j, x, y, p, noise.sigma, noise.floor);
                }
            }
        }
        if noise.floor_noise > 0.0 {
            for j in 0..parts {
                for value in level.map_mut(j) {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *value = (*value as f64 * (noise.floor_noise * g).exp()) as f32;
                }
            }
        }
    });
    Ok(stack)
}

/// A coarse 2D object detection with a discrete viewpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox2,
    pub viewpoint: u8,
    pub score: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(self.bbox.area() > 0.0) {
            return Err(Error::DegenerateBox);
        }
        if self.viewpoint >= VIEWPOINT_BINS {
            return Err(Error::Params(format!("viewpoint bin {} out of range", self.viewpoint)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionNoise {
    /// Standard deviation of the box center offset per axis, pixels.
    pub center_jitter_px: f64,
    /// Standard deviation of the log scale factor applied to width and height.
    pub scale_jitter: f64,
    pub flip_prob: f64,
    pub score: [f64; 2],
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            center_jitter_px: 0.0,
            scale_jitter: 0.0,
            flip_prob: 0.0,
            score: [1.0, 1.0],
        }
    }
}

/// One detection per ground-truth object: its box perturbed by `noise` and
/// its viewpoint bin, replaced by a random other bin with `flip_prob`.
pub fn synth_predetections(scene: &GroundTruthScene, noise: &DetectionNoise, seed: u64) -> Result<Vec<Detection>> {
    if noise.center_jitter_px < 0.0 || noise.scale_jitter < 0.0 || !(0.0..=1.0).contains(&noise.flip_prob) {
        return Err(Error::Params("detection jitter must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Normal::new(0.0, noise.center_jitter_px).unwrap();
    let scale = Normal::new(0.0, noise.scale_jitter).unwrap();
    scene
        .objects
        .iter()
        .map(|o| {
            let (du, dv) = (center.sample(&mut rng), center.sample(&mut rng));
            let (sw, sh) = (scale.sample(&mut rng).exp(), scale.sample(&mut rng).exp());
            // Grow about the center; written so that zero jitter reproduces the box exactly.
            let gw = o.bbox.width() * (sw - 1.0) / 2.0;
            let gh = o.bbox.height() * (sh - 1.0) / 2.0;
            let b = &o.bbox;
            let bbox = BBox2::new(
                b.min_u + du - gw,
                b.min_v + dv - gh,
                b.max_u + du + gw,
                b.max_v + dv + gh,
            );
            let mut viewpoint = o.viewpoint;
            if rng.random::<f64>() < noise.flip_prob {
                let shift = rng.random_range(1..VIEWPOINT_BINS);
                viewpoint = (viewpoint + shift) % VIEWPOINT_BINS;
            }
            let [lo, hi] = noise.score;
            let score = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            Ok(Detection { bbox, viewpoint, score })
        })
        .collect()
}
