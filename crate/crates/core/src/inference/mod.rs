//! Scene inference: coarse lifting of detections into scene particles and
//! per-particle stochastic refinement; the best particle is the estimate.

mod coarse;
mod config;
mod refine;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{Detection, ResponseStack};
use crate::geometry::{BBox2, Camera};
use crate::likelihood::{Model, ObjectView, SceneHypothesis};
use crate::masks::{MaskCatalog, PartState};
use crate::shape::ShapeSpace;
use crate::{Point2, Point3};

pub use coarse::{coarse_lift, k_best_combinations, lift_detection, LiftCandidate};
pub use config::{symmetric_grid, CoarseGrid, InferenceConfig, InitSigma, Variant};
pub use refine::{
    adapt_covariance, enforcement_for, refine_particle, select_mask_by_evidence, update_mask, ParamLayout,
    ParticleTrace, SceneParticle, StepRecord,
};

/// Read-only data a scene is inferred from.
#[derive(Clone, Copy)]
pub struct SceneInputs<'a> {
    pub space: &'a ShapeSpace,
    pub catalog: &'a MaskCatalog,
    pub camera: &'a Camera,
    pub stack: &'a ResponseStack,
    /// Known camera height above the ground.
    pub cam_height: f64,
}

/// Derived per-object quantities of an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEstimate {
    pub detection: Option<usize>,
    pub likelihood: f64,
    pub states: Vec<PartState>,
    pub parts_px: Vec<Point2>,
    pub bbox: BBox2,
    pub centroid: Point3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub scene_id: String,
    pub variant: Variant,
    pub seed: u64,
    /// The detections the scene was lifted from; objects refer to them by index.
    pub detections: Vec<Detection>,
    pub scene: SceneHypothesis,
    pub objects: Vec<ObjectEstimate>,
    /// Index of the winning particle and its refinement trace.
    pub particle: usize,
    pub trace: ParticleTrace,
    /// Final score of every particle by index; `None` where refinement failed.
    pub particle_scores: Vec<Option<f64>>,
}

/// Seed for one scene derived from a master seed and the scene id, so a
/// scene gets the same randomness however a batch is split.
pub fn scene_seed(master: u64, scene_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scene_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ master.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-object derived quantities of a scene hypothesis.
pub fn describe_scene(scene: &SceneHypothesis, model: &Model) -> Result<Vec<ObjectEstimate>> {
    scene
        .objects
        .iter()
        .map(|h| {
            let view = ObjectView::of(h, &scene.ground_plane, model)?;
            let mask = model.mask(h.mask_id)?;
            Ok(ObjectEstimate {
                detection: h.detection,
                likelihood: view.score(mask, model.config.occlusion_constant)?,
                states: view.states(mask),
                bbox: view.cells.bbox,
                centroid: view.placed.centroid(),
                parts_px: view.pixels,
            })
        })
        .collect()
}

/// Lifts `dets`, refines every particle independently (in parallel on the
/// current rayon pool) and returns the best one; ties go to the lower
/// particle index. Identical inputs and seed give identical results
/// regardless of thread count.
pub fn infer_scene(
    dets: &[Detection],
    inputs: &SceneInputs,
    config: &InferenceConfig,
    seed: u64,
    scene_id: &str,
) -> Result<InferenceResult> {
    let config = config.effective();
    config.validate()?;
    let kept: Vec<Detection> = dets
        .iter()
        .filter(|d| d.score >= config.detection_threshold)
        .copied()
        .collect();
    for d in &kept {
        d.validate()?;
    }
    if kept.is_empty() {
        return Err(Error::EmptyScene);
    }
    let model = Model {
        space: inputs.space,
        catalog: inputs.catalog,
        camera: inputs.camera,
        stack: inputs.stack,
        config: &config.likelihood,
    };
    let mut particles = coarse_lift(&kept, inputs.camera, inputs.cam_height, inputs.space, &config)?;
    // Detection indices refer to the caller's list.
    let original: Vec<usize> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| d.score >= config.detection_threshold)
        .map(|(i, _)| i)
        .collect();
    for p in &mut particles {
        for o in &mut p.scene.objects {
            o.detection = o.detection.map(|k| original[k]);
        }
    }
    let refined: Vec<Result<SceneParticle>> = particles
        .into_par_iter()
        .map(|p| refine_particle(p, &model, &config, seed))
        .collect();
    let mut best: Option<(usize, SceneParticle)> = None;
    let mut particle_scores = Vec::with_capacity(refined.len());
    let mut first_error = None;
    for (i, r) in refined.into_iter().enumerate() {
        match r {
            Ok(p) => {
                particle_scores.push(Some(p.scene.score));
                if best.as_ref().is_none_or(|(_, b)| p.scene.score > b.scene.score) {
                    best = Some((i, p));
                }
            }
            Err(e) => {
                log::warn!("particle {i} failed: {e}");
                particle_scores.push(None);
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((index, particle)) = best else {
        return Err(first_error.unwrap_or(Error::EmptyScene));
    };
    let objects = describe_scene(&particle.scene, &model)?;
    Ok(InferenceResult {
        scene_id: scene_id.to_string(),
        variant: config.variant,
        seed,
        detections: dets.to_vec(),
        scene: particle.scene,
        objects,
        particle: index,
        trace: particle.trace,
        particle_scores,
    })
}
