//! Part-evidence likelihood of object and scene hypotheses with occlusion masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::ResponseStack;
use crate::geometry::{
    occluded_by, place_object, self_occlusion_with, Camera, GroundPlane, ObjectPose, PlacedObject, RayMesh,
};
use crate::masks::{admissible_masks, MaskCatalog, OcclusionMask, PartCells, PartState};
use crate::shape::{ShapeCoefficients, ShapeSpace};
use crate::Point2;

/// One object in a scene hypothesis: pose, shape and occlusion mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectHypothesis {
    pub pose: ObjectPose,
    pub shape: ShapeCoefficients,
    pub mask_id: usize,
    /// Per-object supporting plane for models without a shared ground
    /// plane; `None` means the scene's plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<GroundPlane>,
    /// Index of the pre-detection this object was lifted from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<usize>,
}

impl ObjectHypothesis {
    pub fn plane<'a>(&'a self, scene_plane: &'a GroundPlane) -> &'a GroundPlane {
        self.support.as_ref().unwrap_or(scene_plane)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneHypothesis {
    pub ground_plane: GroundPlane,
    pub objects: Vec<ObjectHypothesis>,
    /// Last evaluated scene likelihood.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LikelihoodConfig {
    /// Score credited to each mask-occluded part in place of its evidence.
    pub occlusion_constant: f64,
    /// Pyramid levels searched on either side of the predicted level.
    pub scale_window: usize,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            // Frozen from the calibrate_occlusion example (benchmark noise,
            // 40 validation scenes): label accuracy peaks at 0.955.
            occlusion_constant: 1.0,
            scale_window: 2,
        }
    }
}

/// Read-only inputs shared by every likelihood evaluation.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub space: &'a ShapeSpace,
    pub catalog: &'a MaskCatalog,
    pub camera: &'a Camera,
    pub stack: &'a ResponseStack,
    pub config: &'a LikelihoodConfig,
}

impl Model<'_> {
    pub fn mask(&self, id: usize) -> Result<&OcclusionMask> {
        self.catalog
            .get(id)
            .ok_or_else(|| Error::Params(format!("mask {id} not in catalog")))
    }
}

/// Mask-independent view of a placed object: projections, self-occlusion
/// and the log-ratio of every non-self-occluded part on each searched level.
#[derive(Clone, Debug)]
pub struct ObjectView {
    pub placed: PlacedObject,
    pub pixels: Vec<Point2>,
    pub self_occ: Vec<bool>,
    pub cells: PartCells,
    pub levels: Vec<usize>,
    /// `evidence[k][j]`: log-ratio of part `j` on `levels[k]` (0 for self-occluded parts).
    pub evidence: Vec<Vec<f64>>,
    /// Number of parts not self-occluded.
    pub m: usize,
}

impl ObjectView {
    pub fn new(pose: &ObjectPose, shape: &ShapeCoefficients, gp: &GroundPlane, model: &Model) -> Result<Self> {
        let placed = place_object(model.space, shape, pose, gp)?;
        Self::from_placed(placed, model)
    }

    pub fn of(h: &ObjectHypothesis, scene_plane: &GroundPlane, model: &Model) -> Result<Self> {
        Self::new(&h.pose, &h.shape, h.plane(scene_plane), model)
    }

    pub fn from_placed(placed: PlacedObject, model: &Model) -> Result<Self> {
        let pixels = model.camera.project(&placed.vertices)?;
        let mesh = RayMesh::from_object(&placed);
        let self_occ = self_occlusion_with(&placed, &mesh);
        let cells = PartCells::new(&pixels);
        let m = self_occ.iter().filter(|s| !**s).count();
        let stack = model.stack;
        let center = stack.level_for_height(cells.bbox.height());
        let w = model.config.scale_window;
        let levels: Vec<usize> = (center.saturating_sub(w)..=(center + w).min(stack.levels.len() - 1)).collect();
        let mut evidence = Vec::with_capacity(levels.len());
        for &l in &levels {
            let row = pixels
                .iter()
                .zip(&self_occ)
                .enumerate()
                .map(|(j, (px, &so))| if so { Ok(0.0) } else { stack.part_evidence(l, j, px) })
                .collect::<Result<Vec<f64>>>()?;
            evidence.push(row);
        }
        Ok(Self {
            placed,
            pixels,
            self_occ,
            cells,
            levels,
            evidence,
            m,
        })
    }

    pub fn states(&self, mask: &OcclusionMask) -> Vec<PartState> {
        crate::masks::states_for(mask, &self.cells, &self.self_occ)
    }

    /// Likelihood under `mask` and the level index attaining the maximum.
    pub fn score_with_level(&self, mask: &OcclusionMask, c: f64) -> Result<(f64, usize)> {
        if self.m == 0 {
            return Err(Error::DegenerateView);
        }
        let hidden: Vec<bool> = self
            .cells
            .cells
            .iter()
            .zip(&self.self_occ)
            .map(|(&cell, &so)| !so && mask.covers(cell))
            .collect();
        let occluded = hidden.iter().filter(|h| **h).count();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, row) in self.evidence.iter().enumerate() {
            let mut sum = 0.0;
            for j in 0..row.len() {
                if !self.self_occ[j] && !hidden[j] {
                    sum += row[j];
                }
            }
            if sum > best.0 {
                best = (sum, k);
            }
        }
        Ok(((best.0 + c * occluded as f64) / self.m as f64, best.1))
    }

    pub fn score(&self, mask: &OcclusionMask, c: f64) -> Result<f64> {
        self.score_with_level(mask, c).map(|(s, _)| s)
    }

    /// Best mask among `candidates` by likelihood; ties go to smaller
    /// coverage, then lower id.
    pub fn best_mask(&self, candidates: &[usize], model: &Model) -> Result<(usize, f64)> {
        self.best_mask_with(candidates, model.catalog, model.config.occlusion_constant)
    }

    /// Best of `candidates` at occlusion constant `c`; ties go to smaller
    /// coverage, then lower id.
    pub fn best_mask_with(&self, candidates: &[usize], catalog: &MaskCatalog, c: f64) -> Result<(usize, f64)> {
        let mut best: Option<(f64, f64, usize)> = None;
        for &id in candidates {
            let mask = catalog
                .get(id)
                .ok_or_else(|| Error::Params(format!("mask id {id} not in catalog")))?;
            let s = self.score(mask, c)?;
            let better = match best {
                None => true,
                Some((bs, bc, bid)) => {
                    s > bs || (s == bs && (mask.coverage_fraction < bc || (mask.coverage_fraction == bc && id < bid)))
                }
            };
            if better {
                best = Some((s, mask.coverage_fraction, id));
            }
        }
        best.map(|(s, _, id)| (id, s))
            .ok_or_else(|| Error::Params("no candidate masks".into()))
    }
}

/// Object likelihood: best level's summed visible log-ratios plus `c` per
/// mask-occluded part, normalized by the number of parts that are not
/// self-occluded.
pub fn object_likelihood(h: &ObjectHypothesis, gp: &GroundPlane, model: &Model) -> Result<f64> {
    let view = ObjectView::of(h, gp, model)?;
    view.score(model.mask(h.mask_id)?, model.config.occlusion_constant)
}

/// How mask constraints from modeled objects are applied when scoring a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enforcement {
    /// Masks are taken as given.
    Off,
    /// Inadmissible masks are replaced by the best admissible mask.
    Repair,
    /// Inadmissible masks are an error.
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub total: f64,
    pub per_object: Vec<f64>,
    /// Mask actually scored for each object (after any repair).
    pub masks: Vec<usize>,
}

/// Parts of `views[beta]` hidden by the other objects (sorted).
pub fn gamma(views: &[ObjectView], beta: usize) -> Vec<usize> {
    let meshes: Vec<RayMesh> = views
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != beta)
        .map(|(_, v)| RayMesh::from_object(&v.placed))
        .collect();
    occluded_by(&views[beta].placed, &views[beta].self_occ, &meshes)
}

/// Masks admissible for `views[beta]` given the other objects.
pub fn admissible_for(views: &[ObjectView], beta: usize, catalog: &MaskCatalog) -> Vec<usize> {
    let occ = gamma(views, beta);
    let v = &views[beta];
    admissible_masks(&occ, &v.self_occ, &v.cells, catalog)
}

/// Scene likelihood: sum of object likelihoods, with masks checked against
/// the occlusions between modeled objects per `enforcement`.
pub fn scene_likelihood(scene: &SceneHypothesis, model: &Model, enforcement: Enforcement) -> Result<SceneScore> {
    if scene.objects.is_empty() {
        return Err(Error::EmptyScene);
    }
    let views = scene
        .objects
        .iter()
        .map(|h| ObjectView::of(h, &scene.ground_plane, model))
        .collect::<Result<Vec<_>>>()?;
    score_views(&views, scene, model, enforcement)
}

pub fn score_views(
    views: &[ObjectView],
    scene: &SceneHypothesis,
    model: &Model,
    enforcement: Enforcement,
) -> Result<SceneScore> {
    let c = model.config.occlusion_constant;
    let mut per_object = Vec::with_capacity(views.len());
    let mut masks = Vec::with_capacity(views.len());
    for (beta, (view, h)) in views.iter().zip(&scene.objects).enumerate() {
        let (mask_id, s) = match enforcement {
            Enforcement::Off => (h.mask_id, view.score(model.mask(h.mask_id)?, c)?),
            Enforcement::Repair | Enforcement::Strict => {
                let admissible = admissible_for(views, beta, model.catalog);
                if admissible.contains(&h.mask_id) {
                    (h.mask_id, view.score(model.mask(h.mask_id)?, c)?)
                } else if enforcement == Enforcement::Strict {
                    return Err(Error::ConstraintViolation {
                        object: beta,
                        mask: h.mask_id,
                    });
                } else {
                    view.best_mask(&admissible, model)?
                }
            }
        };
        per_object.push(s);
        masks.push(mask_id);
    }
    Ok(SceneScore {
        total: per_object.iter().sum(),
        per_object,
        masks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartBreakdown {
    pub part: usize,
    pub name: String,
    pub state: PartState,
    pub pixel: Point2,
    /// Log-ratio at the selected level (absent for self-occluded parts).
    pub log_ratio: Option<f64>,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectBreakdown {
    pub likelihood: f64,
    pub level: usize,
    pub normalizer: usize,
    pub mask_id: usize,
    pub parts: Vec<PartBreakdown>,
}

/// Per-part decomposition of [`object_likelihood`]; contributions sum to
/// `likelihood * normalizer`.
pub fn explain_object(h: &ObjectHypothesis, gp: &GroundPlane, model: &Model) -> Result<ObjectBreakdown> {
    let view = ObjectView::of(h, gp, model)?;
    let mask = model.mask(h.mask_id)?;
    let c = model.config.occlusion_constant;
    let (likelihood, k) = view.score_with_level(mask, c)?;
    let states = view.states(mask);
    let names = &model.space.part_names;
    let parts = states
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let lr = view.evidence[k][j];
            let (log_ratio, contribution) = match st {
                PartState::SelfOccluded => (None, 0.0),
                PartState::MaskOccluded => (Some(lr), c),
                PartState::Visible => (Some(lr), lr),
            };
            PartBreakdown {
                part: j,
                name: names.get(j).cloned().unwrap_or_else(|| format!("part_{j}")),
                state: *st,
                pixel: view.pixels[j],
                log_ratio,
                contribution,
            }
        })
        .collect();
    Ok(ObjectBreakdown {
        likelihood,
        level: view.levels[k],
        normalizer: view.m,
        mask_id: h.mask_id,
        parts,
    })
}

/// A ground-truth object view with its true part states, used to
/// calibrate the occlusion constant.
#[derive(Clone, Debug)]
pub struct CalibrationCase {
    pub view: ObjectView,
    pub truth: Vec<PartState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub best: f64,
    /// `(c, accuracy)` for every candidate in grid order.
    pub accuracy: Vec<(f64, f64)>,
}

/// Grid search for the occlusion constant maximizing occlusion-label
/// accuracy when every case picks its mask by evidence from the whole
/// catalog. Accuracy pools the not self-occluded parts of all cases; ties
/// go to the earlier grid value.
pub fn calibrate_occlusion_constant(
    cases: &[CalibrationCase],
    catalog: &MaskCatalog,
    grid: &[f64],
) -> Result<Calibration> {
    use rayon::prelude::*;
    if cases.is_empty() || grid.is_empty() {
        return Err(Error::Params("calibration needs cases and candidate values".into()));
    }
    let all: Vec<usize> = (0..catalog.len()).collect();
    let mut accuracy = Vec::with_capacity(grid.len());
    for &c in grid {
        let counts = cases
            .par_iter()
            .map(|case| -> Result<(usize, usize)> {
                let (id, _) = case.view.best_mask_with(&all, catalog, c)?;
                let predicted = case.view.states(&catalog.masks[id]);
                let mut hits = 0;
                let mut total = 0;
                for (p, t) in predicted.iter().zip(&case.truth) {
                    if *t == PartState::SelfOccluded {
                        continue;
                    }
                    total += 1;
                    if (*p == PartState::MaskOccluded) == (*t == PartState::MaskOccluded) {
                        hits += 1;
                    }
                }
                Ok((hits, total))
            })
            .collect::<Result<Vec<_>>>()?;
        let (hits, total) = counts.iter().fold((0, 0), |(h, t), (a, b)| (h + a, t + b));
        if total == 0 {
            return Err(Error::Params("calibration cases have no scorable parts".into()));
        }
        accuracy.push((c, hits as f64 / total as f64));
    }
    let best = accuracy
        .iter()
        .fold(None::<(f64, f64)>, |b, &(c, a)| match b {
            Some((_, ba)) if ba >= a => b,
            _ => Some((c, a)),
        })
        .map(|(c, _)| c)
        .expect("nonempty grid");
    Ok(Calibration { best, accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::PyramidSpec;
    use crate::masks::{generate_mask_catalog, MaskParams};
    use crate::shape::{fit_shape_space, generate_exemplars};

    struct Fixture {
        space: ShapeSpace,
        catalog: MaskCatalog,
        camera: Camera,
        stack: ResponseStack,
        config: LikelihoodConfig,
    }

    impl Fixture {
        fn new() -> Self {
            let space = fit_shape_space(&generate_exemplars(20, 2).exemplars, 4).unwrap();
            let camera = Camera::default();
            let stack = ResponseStack::new(36, camera.width, camera.height, PyramidSpec::default(), 0.5, 0.5);
            Self {
                space,
                catalog: generate_mask_catalog(&MaskParams::default()).unwrap(),
                camera,
                stack,
                config: LikelihoodConfig::default(),
            }
        }

        fn model(&self) -> Model<'_> {
            Model {
                space: &self.space,
                catalog: &self.catalog,
                camera: &self.camera,
                stack: &self.stack,
                config: &self.config,
            }
        }
    }

    fn hyp(x: f64, z: f64, az: f64, mask_id: usize) -> ObjectHypothesis {
        ObjectHypothesis {
            pose: ObjectPose::new(x, z, az),
            shape: ShapeCoefficients::zeros(4),
            mask_id,
            support: None,
            detection: None,
        }
    }

    #[test]
    fn unit_ratio_with_empty_mask_is_zero() {
        let f = Fixture::new();
        let l = object_likelihood(&hyp(0.0, 10.0, 0.6, 0), &GroundPlane::flat(1.65), &f.model()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn unit_ratio_with_mask_counts_constant() {
        let f = Fixture::new();
        let gp = GroundPlane::flat(1.65);
        let h = hyp(0.0, 10.0, 0.6, 40);
        let view = ObjectView::of(&h, &gp, &f.model()).unwrap();
        let states = view.states(f.catalog.get(40).unwrap());
        let k = states.iter().filter(|s| **s == PartState::MaskOccluded).count();
        let l = object_likelihood(&h, &gp, &f.model()).unwrap();
        assert!(k > 0);
        assert!((l - k as f64 * f.config.occlusion_constant / view.m as f64).abs() < 1e-12);
    }

    #[test]
    fn breakdown_sums_to_likelihood() {
        let f = Fixture::new();
        let gp = GroundPlane::flat(1.65);
        let h = hyp(1.0, 12.0, -0.3, 17);
        let b = explain_object(&h, &gp, &f.model()).unwrap();
        let total: f64 = b.parts.iter().map(|p| p.contribution).sum();
        assert!((total / b.normalizer as f64 - b.likelihood).abs() < 1e-12);
    }

    #[test]
    fn far_apart_objects_add_up() {
        let f = Fixture::new();
        let gp = GroundPlane::flat(1.65);
        let a = hyp(-4.0, 12.0, 0.3, 5);
        let b = hyp(4.0, 12.0, 1.3, 9);
        let scene = SceneHypothesis {
            ground_plane: gp,
            objects: vec![a.clone(), b.clone()],
            score: 0.0,
        };
        let s = scene_likelihood(&scene, &f.model(), Enforcement::Strict).unwrap();
        let la = object_likelihood(&a, &gp, &f.model()).unwrap();
        let lb = object_likelihood(&b, &gp, &f.model()).unwrap();
        assert_eq!(s.total, la + lb);
    }

    #[test]
    fn empty_scene_is_an_error() {
        let f = Fixture::new();
        let scene = SceneHypothesis {
            ground_plane: GroundPlane::flat(1.65),
            objects: vec![],
            score: 0.0,
        };
        assert!(matches!(
            scene_likelihood(&scene, &f.model(), Enforcement::Off),
            Err(Error::EmptyScene)
        ));
    }
}
