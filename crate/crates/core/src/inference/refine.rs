//! Per-particle refinement: Gaussian pose/shape sampling alternated with
//! exhaustive occlusion-mask updates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{GroundPlane, ObjectPose, MAX_TILT};
use crate::likelihood::{
    admissible_for, gamma, score_views, Enforcement, Model, ObjectHypothesis, ObjectView, SceneHypothesis,
};
use crate::masks::select_mask_covering;
use crate::shape::ShapeCoefficients;

use super::config::{InferenceConfig, Variant};

/// Layout of an object's sampled parameter vector:
/// `[x, z, azimuth, s_1..s_r]`, followed by `[pitch, roll, height]` of the
/// object's own support plane when there is no shared ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub rank: usize,
    pub support: bool,
}

impl ParamLayout {
    pub fn new(rank: usize, variant: &Variant) -> Self {
        Self {
            rank,
            support: !variant.ground_plane,
        }
    }

    pub fn dim(&self) -> usize {
        3 + self.rank + if self.support { 3 } else { 0 }
    }

    pub fn encode(&self, h: &ObjectHypothesis, scene_plane: &GroundPlane) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend([h.pose.x, h.pose.z, h.pose.azimuth]);
        v.extend(h.shape.0.iter().copied());
        if self.support {
            let p = h.plane(scene_plane);
            v.extend([p.pitch, p.roll, p.cam_height]);
        }
        v
    }

    /// Clamps shape and support entries into their valid ranges in place.
    pub fn clamp(&self, v: &mut [f64], shape_limit: f64) {
        for s in &mut v[3..3 + self.rank] {
            *s = s.clamp(-shape_limit, shape_limit);
        }
        if self.support {
            let k = 3 + self.rank;
            let tilt = MAX_TILT - 0.01;
            v[k] = v[k].clamp(-tilt, tilt);
            v[k + 1] = v[k + 1].clamp(-tilt, tilt);
            v[k + 2] = v[k + 2].clamp(0.2, 10.0);
        }
    }

    pub fn decode(&self, v: &[f64], template: &ObjectHypothesis) -> ObjectHypothesis {
        let support = self.support.then(|| {
            let k = 3 + self.rank;
            GroundPlane {
                pitch: v[k],
                roll: v[k + 1],
                cam_height: v[k + 2],
            }
        });
        ObjectHypothesis {
            pose: ObjectPose::new(v[0], v[1], v[2]),
            shape: ShapeCoefficients(v[3..3 + self.rank].to_vec()),
            mask_id: template.mask_id,
            support: if self.support { support } else { template.support },
            detection: template.detection,
        }
    }

    pub fn initial_sigma(&self, config: &InferenceConfig) -> Vec<f64> {
        let s = &config.init_sigma;
        let mut v = vec![s.x, s.z, s.azimuth_deg.to_radians()];
        v.extend(std::iter::repeat_n(s.shape, self.rank));
        if self.support {
            v.extend([s.pitch_deg.to_radians(), s.roll_deg.to_radians(), s.height]);
        }
        v
    }
}

/// Object likelihoods around one Step-1 update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleTrace {
    /// Sum of object likelihoods after each iteration.
    pub scores: Vec<f64>,
    pub step1: Vec<StepRecord>,
}

/// One scene hypothesis with its frozen ground plane and per-object
/// sampling standard deviations (the diagonal of the sampling covariance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParticle {
    pub scene: SceneHypothesis,
    pub sigma: Vec<Vec<f64>>,
    pub stream: u64,
    pub trace: ParticleTrace,
}

impl SceneParticle {
    pub fn new(scene: SceneHypothesis, config: &InferenceConfig, stream: u64) -> Self {
        let rank = scene.objects.first().map_or(0, |o| o.shape.len());
        let layout = ParamLayout::new(rank, &config.variant);
        let sigma = vec![layout.initial_sigma(config); scene.objects.len()];
        Self {
            scene,
            sigma,
            stream,
            trace: ParticleTrace::default(),
        }
    }
}

/// Score-weighted standard deviations of `samples` (softmax weights at
/// `temperature`, variance about the weighted mean), clamped per dimension
/// to `[min, max]`. Fewer than two samples leave `current` unchanged.
pub fn adapt_covariance(
    samples: &[(Vec<f64>, f64)],
    current: &[f64],
    temperature: f64,
    min: &[f64],
    max: &[f64],
) -> Vec<f64> {
    if samples.len() < 2 {
        return current.to_vec();
    }
    let top = samples.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = samples.iter().map(|(_, s)| ((s - top) / temperature).exp()).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    (0..current.len())
        .map(|k| {
            let mean: f64 = samples.iter().zip(&w).map(|((x, _), wi)| wi * x[k]).sum();
            let var: f64 = samples
                .iter()
                .zip(&w)
                .map(|((x, _), wi)| wi * (x[k] - mean) * (x[k] - mean))
                .sum();
            var.sqrt().clamp(min[k], max[k])
        })
        .collect()
}

/// Mask maximizing the object likelihood among `candidates`; ties go to
/// smaller coverage, then lower id.
pub fn select_mask_by_evidence(view: &ObjectView, candidates: &[usize], model: &Model) -> Result<usize> {
    view.best_mask(candidates, model).map(|(id, _)| id)
}

/// Mask update for object `beta` under `variant` given current views.
pub fn update_mask(views: &[ObjectView], beta: usize, variant: &Variant, model: &Model) -> Result<usize> {
    let v = &views[beta];
    match (variant.deterministic_occlusion, variant.searched_occluder) {
        (true, true) => select_mask_by_evidence(v, &admissible_for(views, beta, model.catalog), model),
        (true, false) => {
            let occ = gamma(views, beta);
            Ok(select_mask_covering(&occ, &v.self_occ, &v.cells, model.catalog))
        }
        (false, true) => {
            let all: Vec<usize> = (0..model.catalog.len()).collect();
            select_mask_by_evidence(v, &all, model)
        }
        (false, false) => Ok(0),
    }
}

/// Constraint handling when scoring a refined particle under `variant`.
pub fn enforcement_for(variant: &Variant) -> Enforcement {
    if variant.deterministic_occlusion && variant.searched_occluder {
        Enforcement::Repair
    } else {
        Enforcement::Off
    }
}

/// Runs the configured number of sample/mask/covariance iterations on one
/// particle. The ground plane never changes. Randomness comes from stream
/// `particle.stream` of `seed`, so particles are independent.
pub fn refine_particle(
    mut particle: SceneParticle,
    model: &Model,
    config: &InferenceConfig,
    seed: u64,
) -> Result<SceneParticle> {
    let variant = config.variant;
    let gp = particle.scene.ground_plane;
    let n = particle.scene.objects.len();
    let layout = ParamLayout::new(model.space.rank(), &variant);
    let init = layout.initial_sigma(config);
    let lo: Vec<f64> = init.iter().map(|s| s * config.sigma_min_factor).collect();
    let hi: Vec<f64> = init.iter().map(|s| s * config.sigma_max_factor).collect();
    let c = model.config.occlusion_constant;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle.stream);

    let mut views = particle
        .scene
        .objects
        .iter()
        .map(|h| ObjectView::of(h, &gp, model))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = views
        .iter()
        .zip(&particle.scene.objects)
        .map(|(v, h)| v.score(model.mask(h.mask_id)?, c))
        .collect::<Result<Vec<f64>>>()?;

    for _ in 0..config.iterations {
        // Step 1: sample pose and shape per object, masks held fixed.
        let mut record = StepRecord {
            before: scores.clone(),
            after: Vec::with_capacity(n),
        };
        let mut sample_sets = Vec::with_capacity(n);
        for beta in 0..n {
            let h = particle.scene.objects[beta].clone();
            let mask = model.mask(h.mask_id)?;
            let current = layout.encode(&h, &gp);
            let sigma = &particle.sigma[beta];
            let mut samples = Vec::with_capacity(config.n_samples);
            let mut best: Option<(f64, ObjectHypothesis, ObjectView)> = None;
            for _ in 0..config.n_samples {
                let mut v: Vec<f64> = current
                    .iter()
                    .zip(sigma)
                    .map(|(x, s)| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        x + s * g
                    })
                    .collect();
                layout.clamp(&mut v, config.shape_limit);
                let cand = layout.decode(&v, &h);
                let Ok(view) = ObjectView::of(&cand, &gp, model) else {
                    continue;
                };
                let Ok(s) = view.score(mask, c) else { continue };
                samples.push((v, s));
                let incumbent = best.as_ref().map_or(scores[beta], |b| b.0);
                if s > incumbent {
                    best = Some((s, cand, view));
                }
            }
            if let Some((s, cand, view)) = best {
                scores[beta] = s;
                particle.scene.objects[beta] = cand;
                views[beta] = view;
            }
            record.after.push(scores[beta]);
            sample_sets.push(samples);
        }
        // Step 2: exhaustive mask update against the current scene.
        for beta in 0..n {
            let id = update_mask(&views, beta, &variant, model)?;
            particle.scene.objects[beta].mask_id = id;
            scores[beta] = views[beta].score(model.mask(id)?, c)?;
        }
        // Step 3: adapt the sampling spread.
        for (beta, samples) in sample_sets.iter().enumerate() {
            particle.sigma[beta] = adapt_covariance(samples, &particle.sigma[beta], config.temperature, &lo, &hi);
        }
        particle.trace.step1.push(record);
        particle.trace.scores.push(scores.iter().sum());
    }
    let final_score = score_views(&views, &particle.scene, model, enforcement_for(&variant))?;
    for (h, id) in particle.scene.objects.iter_mut().zip(&final_score.masks) {
        h.mask_id = *id;
    }
    particle.scene.score = final_score.total;
    Ok(particle)
}
