//! Evaluation protocol: true positives are pre-detections that overlap a
//! ground-truth car and agree with its coarse viewpoint; on those we score
//! 3D localization, viewpoint, 2D part localization and occlusion labels,
//! stratified by how occluded the car is, and compare variants with paired
//! sign tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::evidence::{apparent_azimuth, bin_center, Detection, GroundTruthScene, GtObject, ResponseStack};
use crate::geometry::{angle_diff, ObjectPose};
use crate::inference::{infer_scene, scene_seed, InferenceConfig, InferenceResult, SceneInputs, Variant};
use crate::io::{json_files, load_json, save_json, Project, SceneDir};
use crate::masks::{MaskCatalog, PartState};
use crate::shape::ShapeSpace;
use crate::{Point2, Point3};

pub const IOU_GATE: f64 = 0.5;
pub const VIEWPOINT_GATE_DEG: f64 = 45.0;
pub const LOCALIZATION_THRESHOLDS_M: [f64; 2] = [1.0, 1.5];
pub const VIEWPOINT_THRESHOLDS_DEG: [f64; 2] = [5.0, 10.0];
/// Part tolerance as a fraction of the projected car length.
pub const PART_TOLERANCE: f64 = 0.04;
/// Fraction of parts that must be correct for a car to count.
pub const PART_CORRECT_FRACTION: f64 = 0.7;
/// Fraction of parts that must be visible for a car to be evaluated.
pub const PART_ELIGIBLE_FRACTION: f64 = 0.7;

/// Angle error assigned to a true positive the variant produced no estimate for.
const MISSING_ANGLE_DEG: f64 = 180.0;

/// A pre-detection accepted as a true positive for a ground-truth car.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TpMatch {
    pub gt: usize,
    pub detection: usize,
    pub iou: f64,
}

fn viewpoint_agrees(det: &Detection, pose: &ObjectPose) -> bool {
    angle_diff(bin_center(det.viewpoint), apparent_azimuth(pose)).to_degrees() <= VIEWPOINT_GATE_DEG + 1e-9
}

/// Greedy matching: detections in descending score order (ties by index)
/// each take the unmatched car with the highest box overlap among those
/// passing the overlap and viewpoint gates. Each car is matched at most once.
pub fn match_tps(detections: &[Detection], gt: &GroundTruthScene) -> Vec<TpMatch> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; gt.objects.len()];
    let mut out = Vec::new();
    for d in order {
        let det = &detections[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, obj) in gt.objects.iter().enumerate() {
            if taken[g] || !viewpoint_agrees(det, &obj.pose) {
                continue;
            }
            let iou = det.bbox.iou(&obj.bbox);
            if iou > IOU_GATE && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            taken[g] = true;
            out.push(TpMatch {
                gt: g,
                detection: d,
                iou,
            });
        }
    }
    out.sort_by_key(|m| m.gt);
    out
}

/// The per-car quantities the metrics compare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    /// Camera-frame centroid.
    pub centroid: Point3,
    pub azimuth: f64,
    pub apparent_azimuth: f64,
    pub parts_px: Vec<Point2>,
    pub states: Vec<PartState>,
}

impl ObjectRecord {
    pub fn from_truth(o: &GtObject) -> Self {
        Self {
            centroid: o.centroid,
            azimuth: o.pose.azimuth,
            apparent_azimuth: apparent_azimuth(&o.pose),
            parts_px: o.parts_px.clone(),
            states: o.states.clone(),
        }
    }
}

/// A true positive with the variant's estimate for it, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub scene_id: String,
    pub gt_index: usize,
    pub detection: usize,
    /// Ground-truth parts hidden by other objects or occluders.
    pub occluded_parts: usize,
    /// Projected car length in pixels: the longer side of its image box.
    pub length_px: f64,
    pub truth: ObjectRecord,
    pub estimate: Option<ObjectRecord>,
}

impl Pair {
    pub fn centroid_error(&self) -> Option<f64> {
        self.estimate
            .as_ref()
            .map(|e| (e.centroid - self.truth.centroid).norm())
    }

    pub fn azimuth_error_deg(&self) -> f64 {
        self.estimate.as_ref().map_or(MISSING_ANGLE_DEG, |e| {
            angle_diff(e.azimuth, self.truth.azimuth).to_degrees()
        })
    }

    pub fn apparent_error_deg(&self) -> f64 {
        self.estimate.as_ref().map_or(MISSING_ANGLE_DEG, |e| {
            angle_diff(e.apparent_azimuth, self.truth.apparent_azimuth).to_degrees()
        })
    }
}

/// True positives of one scene paired with the estimates in `result`.
pub fn pairs_for_scene(gt: &GroundTruthScene, result: &InferenceResult) -> Vec<Pair> {
    match_tps(&result.detections, gt)
        .into_iter()
        .map(|m| {
            let obj = &gt.objects[m.gt];
            let estimate = result
                .scene
                .objects
                .iter()
                .zip(&result.objects)
                .find(|(h, _)| h.detection == Some(m.detection))
                .map(|(h, e)| ObjectRecord {
                    centroid: e.centroid,
                    azimuth: h.pose.azimuth,
                    apparent_azimuth: apparent_azimuth(&h.pose),
                    parts_px: e.parts_px.clone(),
                    states: e.states.clone(),
                });
            Pair {
                scene_id: gt.id.clone(),
                gt_index: m.gt,
                detection: m.detection,
                occluded_parts: obj.occluded_count(),
                length_px: obj.bbox.width().max(obj.bbox.height()),
                truth: ObjectRecord::from_truth(obj),
                estimate,
            }
        })
        .collect()
}

/// Median; an even count averages the middle pair.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

/// Fraction of pairs whose centroid error is below each threshold. Pairs
/// without an estimate count as misses.
pub fn localization_buckets(pairs: &[Pair], thresholds: &[f64]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    Ok(thresholds
        .iter()
        .map(|t| {
            fraction(
                pairs
                    .iter()
                    .filter(|p| p.centroid_error().is_some_and(|e| e < *t))
                    .count(),
                pairs.len(),
            )
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewpointStats {
    pub within_5_deg: f64,
    pub within_10_deg: f64,
    pub median_3d_deg: f64,
    pub median_2d_deg: f64,
}

/// Azimuth accuracy; errors are wrapped to `[0, 180]` degrees.
pub fn viewpoint_stats(pairs: &[Pair]) -> Result<ViewpointStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let errs: Vec<f64> = pairs.iter().map(Pair::azimuth_error_deg).collect();
    let apparent: Vec<f64> = pairs.iter().map(Pair::apparent_error_deg).collect();
    let within = |t: f64| fraction(errs.iter().filter(|e| **e < t).count(), errs.len());
    Ok(ViewpointStats {
        within_5_deg: within(VIEWPOINT_THRESHOLDS_DEG[0]),
        within_10_deg: within(VIEWPOINT_THRESHOLDS_DEG[1]),
        median_3d_deg: median(&errs).unwrap_or(0.0),
        median_2d_deg: median(&apparent).unwrap_or(0.0),
    })
}

/// Fraction of eligible cars with at least 70% of their not self-occluded
/// parts projected within 4% of the car length of the truth. Cars are
/// eligible when at least 70% of those parts are visible. `None` when no
/// car is eligible.
pub fn part_localization(pairs: &[Pair]) -> Option<f64> {
    let mut eligible = 0;
    let mut correct = 0;
    for p in pairs {
        let considered: Vec<usize> = (0..p.truth.states.len())
            .filter(|&j| p.truth.states[j] != PartState::SelfOccluded)
            .collect();
        if considered.is_empty() {
            continue;
        }
        let visible = considered
            .iter()
            .filter(|&&j| p.truth.states[j] == PartState::Visible)
            .count();
        if (visible as f64) < PART_ELIGIBLE_FRACTION * considered.len() as f64 {
            continue;
        }
        eligible += 1;
        let Some(est) = &p.estimate else { continue };
        let tol = PART_TOLERANCE * p.length_px;
        let hits = considered
            .iter()
            .filter(|&&j| (est.parts_px[j] - p.truth.parts_px[j]).norm() <= tol)
            .count();
        if hits as f64 >= PART_CORRECT_FRACTION * considered.len() as f64 {
            correct += 1;
        }
    }
    (eligible > 0).then(|| fraction(correct, eligible))
}

/// Fraction of not self-occluded ground-truth parts, pooled over all cars,
/// whose occluded/visible label is predicted correctly. Only mask occlusion
/// counts as a predicted occlusion, so variants without masks predict every
/// part visible, as does a missing estimate. `None` without any such part.
pub fn occlusion_accuracy(pairs: &[Pair]) -> Option<f64> {
    let mut total = 0;
    let mut correct = 0;
    for p in pairs {
        for (j, s) in p.truth.states.iter().enumerate() {
            if *s == PartState::SelfOccluded {
                continue;
            }
            total += 1;
            let truth = *s == PartState::MaskOccluded;
            let predicted = p
                .estimate
                .as_ref()
                .is_some_and(|e| e.states[j] == PartState::MaskOccluded);
            if truth == predicted {
                correct += 1;
            }
        }
    }
    (total > 0).then(|| fraction(correct, total))
}

/// Occlusion strata of the true positives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    All,
    /// One or more parts hidden.
    Occluded,
    /// Four or more parts hidden.
    Severe,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::All, Stratum::Occluded, Stratum::Severe];

    pub fn contains(self, occluded_parts: usize) -> bool {
        match self {
            Stratum::All => true,
            Stratum::Occluded => occluded_parts >= 1,
            Stratum::Severe => occluded_parts >= 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stratum::All => "all",
            Stratum::Occluded => "occ>0",
            Stratum::Severe => "occ>3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pairs: usize,
    /// True positives the variant produced no estimate for.
    pub missing: usize,
    pub loc_1m: f64,
    pub loc_1_5m: f64,
    pub vp_5deg: f64,
    pub vp_10deg: f64,
    pub median_azimuth_3d_deg: f64,
    pub median_azimuth_2d_deg: f64,
    /// Over pairs with an estimate; `None` if there are none.
    pub median_centroid_error_m: Option<f64>,
    pub part_localization: Option<f64>,
    pub occlusion_accuracy: Option<f64>,
}

impl Metrics {
    pub fn compute(pairs: &[Pair]) -> Result<Metrics> {
        let loc = localization_buckets(pairs, &LOCALIZATION_THRESHOLDS_M)?;
        let vp = viewpoint_stats(pairs)?;
        let errors: Vec<f64> = pairs.iter().filter_map(Pair::centroid_error).collect();
        Ok(Metrics {
            pairs: pairs.len(),
            missing: pairs.len() - errors.len(),
            loc_1m: loc[0],
            loc_1_5m: loc[1],
            vp_5deg: vp.within_5_deg,
            vp_10deg: vp.within_10_deg,
            median_azimuth_3d_deg: vp.median_3d_deg,
            median_azimuth_2d_deg: vp.median_2d_deg,
            median_centroid_error_m: median(&errors),
            part_localization: part_localization(pairs),
            occlusion_accuracy: occlusion_accuracy(pairs),
        })
    }

    fn check(&self) -> std::result::Result<(), String> {
        let fractions = [
            Some(self.loc_1m),
            Some(self.loc_1_5m),
            Some(self.vp_5deg),
            Some(self.vp_10deg),
            self.part_localization,
            self.occlusion_accuracy,
        ];
        if fractions.iter().flatten().any(|f| !(0.0..=1.0).contains(f)) {
            return Err("fraction outside [0, 1]".into());
        }
        let medians = [
            Some(self.median_azimuth_3d_deg),
            Some(self.median_azimuth_2d_deg),
            self.median_centroid_error_m,
        ];
        if medians.iter().flatten().any(|m| !(*m >= 0.0)) {
            return Err("negative or undefined median".into());
        }
        if self.loc_1_5m < self.loc_1m {
            return Err(format!("loc@1.5m {} below loc@1m {}", self.loc_1_5m, self.loc_1m));
        }
        if self.vp_10deg < self.vp_5deg {
            return Err(format!("vp@10 {} below vp@5 {}", self.vp_10deg, self.vp_5deg));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumMetrics {
    pub stratum: Stratum,
    /// `None` when the stratum holds no true positives.
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub strata: Vec<StratumMetrics>,
}

/// One-sided paired sign test that `better` has lower centroid error than
/// `worse`, over true positives both variants estimated. Ties are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub better: Variant,
    pub worse: Variant,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial parameters");
    b.sf(wins as u64 - 1)
}

pub fn sign_test(better: Variant, better_pairs: &[Pair], worse: Variant, worse_pairs: &[Pair]) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for a in better_pairs {
        let Some(b) = worse_pairs
            .iter()
            .find(|b| b.scene_id == a.scene_id && b.gt_index == a.gt_index)
        else {
            continue;
        };
        let (Some(ea), Some(eb)) = (a.centroid_error(), b.centroid_error()) else {
            continue;
        };
        match ea.total_cmp(&eb) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    SignTest {
        better,
        worse,
        wins,
        losses,
        ties,
        p_value: sign_test_p(wins, losses),
    }
}

/// Variant comparisons of the ablation ordering, as (better, worse).
pub fn ordering_comparisons() -> Vec<(Variant, Variant)> {
    vec![
        (Variant::FULL, Variant::FG_GP),
        (Variant::FG_GP, Variant::FG),
        (Variant::FG_GP, Variant::COARSE_GP),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: usize,
    pub variants: Vec<VariantReport>,
    pub sign_tests: Vec<SignTest>,
}

impl EvalReport {
    /// Range, threshold-monotonicity and stratum-nesting checks.
    pub fn validate(&self) -> Result<()> {
        for v in &self.variants {
            let mut last = usize::MAX;
            for s in &v.strata {
                let n = s.metrics.as_ref().map_or(0, |m| m.pairs);
                if n > last {
                    return Err(Error::Params(format!(
                        "{}: stratum {} not nested",
                        v.variant,
                        s.stratum.label()
                    )));
                }
                last = n;
                if let Some(m) = &s.metrics {
                    m.check()
                        .map_err(|e| Error::Params(format!("{} {}: {e}", v.variant, s.stratum.label())))?;
                }
            }
        }
        if self.sign_tests.iter().any(|t| !(0.0..=1.0).contains(&t.p_value)) {
            return Err(Error::Params("p-value outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn metrics(&self, variant: Variant, stratum: Stratum) -> Option<&Metrics> {
        self.variants
            .iter()
            .find(|v| v.variant == variant)?
            .strata
            .iter()
            .find(|s| s.stratum == stratum)?
            .metrics
            .as_ref()
    }

    /// Aligned text table, one block per stratum.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let pct = |f: Option<f64>| f.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
        for stratum in Stratum::ALL {
            let _ = writeln!(out, "[{}]", stratum.label());
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>8} {:>9} {:>7} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
                "variant", "n", "loc@1m", "loc@1.5m", "vp@5", "vp@10", "med3D", "med2D", "medDist", "part", "occ"
            );
            for v in &self.variants {
                let m = v
                    .strata
                    .iter()
                    .find(|s| s.stratum == stratum)
                    .and_then(|s| s.metrics.as_ref());
                match m {
                    Some(m) => {
                        let _ = writeln!(
                            out,
                            "{:<14} {:>5} {:>8} {:>9} {:>7} {:>8} {:>8.2} {:>8.2} {:>8} {:>7} {:>7}",
                            v.variant.to_string(),
                            m.pairs,
                            pct(Some(m.loc_1m)),
                            pct(Some(m.loc_1_5m)),
                            pct(Some(m.vp_5deg)),
                            pct(Some(m.vp_10deg)),
                            m.median_azimuth_3d_deg,
                            m.median_azimuth_2d_deg,
                            m.median_centroid_error_m.map_or("-".into(), |d| format!("{d:.3}")),
                            pct(m.part_localization),
                            pct(m.occlusion_accuracy),
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{:<14} {:>5}", v.variant.to_string(), 0);
                    }
                }
            }
            out.push('\n');
        }
        if !self.sign_tests.is_empty() {
            let _ = writeln!(out, "sign tests (median centroid error, one-sided)");
            for t in &self.sign_tests {
                let _ = writeln!(
                    out,
                    "  {} < {}: wins {} losses {} ties {} p = {:.3e}",
                    t.better, t.worse, t.wins, t.losses, t.ties, t.p_value
                );
            }
        }
        out
    }
}

/// Builds the report from ground truth and each variant's results. Every
/// variant needs a result for every scene.
pub fn evaluate(gts: &[GroundTruthScene], results: &[(Variant, Vec<InferenceResult>)]) -> Result<EvalReport> {
    let mut all_pairs: Vec<(Variant, Vec<Pair>)> = Vec::with_capacity(results.len());
    for (variant, rs) in results {
        let mut pairs = Vec::new();
        for gt in gts {
            let r = rs
                .iter()
                .find(|r| r.scene_id == gt.id)
                .ok_or_else(|| Error::MissingArtifact(format!("{variant} result for scene '{}'", gt.id)))?;
            pairs.extend(pairs_for_scene(gt, r));
        }
        pairs.sort_by(|a, b| a.scene_id.cmp(&b.scene_id).then(a.gt_index.cmp(&b.gt_index)));
        all_pairs.push((*variant, pairs));
    }
    let mut variants = Vec::with_capacity(all_pairs.len());
    for (variant, pairs) in &all_pairs {
        let mut strata = Vec::with_capacity(3);
        for stratum in Stratum::ALL {
            let subset: Vec<Pair> = pairs
                .iter()
                .filter(|p| stratum.contains(p.occluded_parts))
                .cloned()
                .collect();
            let metrics = if subset.is_empty() {
                None
            } else {
                Some(Metrics::compute(&subset)?)
            };
            strata.push(StratumMetrics { stratum, metrics });
        }
        variants.push(VariantReport {
            variant: *variant,
            strata,
        });
    }
    let find = |v: Variant| all_pairs.iter().find(|(w, _)| *w == v).map(|(_, p)| p);
    let sign_tests = ordering_comparisons()
        .into_iter()
        .filter_map(|(a, b)| Some(sign_test(a, find(a)?, b, find(b)?)))
        .collect();
    let report = EvalReport {
        scenes: gts.len(),
        variants,
        sign_tests,
    };
    report.validate()?;
    Ok(report)
}

/// Evaluates every inference result found under `results_dir` (searched
/// recursively, grouped by the variant recorded in each file) against the
/// ground truth in `gt_dir`: either scene files directly or scene
/// directories holding `scene.json`. Variants appear in table order.
pub fn evaluate_dirs(results_dir: &Path, gt_dir: &Path) -> Result<EvalReport> {
    let gts = load_ground_truth(gt_dir)?;
    let mut results: Vec<(Variant, Vec<InferenceResult>)> = Vec::new();
    for path in json_files_recursive(results_dir)? {
        let r: InferenceResult = load_json(&path)?;
        match results.iter_mut().find(|(v, _)| *v == r.variant) {
            Some((_, rs)) => rs.push(r),
            None => results.push((r.variant, vec![r])),
        }
    }
    if results.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "inference results under {}",
            results_dir.display()
        )));
    }
    let order = Variant::table();
    results.sort_by_key(|(v, _)| order.iter().position(|w| w == v).unwrap_or(usize::MAX));
    evaluate(&gts, &results)
}

/// Ground-truth scenes in `dir`, sorted by id.
pub fn load_ground_truth(dir: &Path) -> Result<Vec<GroundTruthScene>> {
    let mut gts = Vec::new();
    for p in json_files(dir)? {
        gts.push(load_json::<GroundTruthScene>(&p)?);
    }
    let entries = std::fs::read_dir(dir)?;
    for entry in entries {
        let sub = SceneDir::new(entry?.path());
        if sub.path.is_dir() && sub.scene_path().is_file() {
            gts.push(sub.load_scene()?);
        }
    }
    if gts.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "ground-truth scenes under {}",
            dir.display()
        )));
    }
    gts.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(gts)
}

fn json_files_recursive(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = json_files(dir)?;
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        out.extend(json_files_recursive(&d)?);
    }
    Ok(out)
}

/// Runs `variants` on one scene, in the given order.
#[allow(clippy::too_many_arguments)]
pub fn ablate_scene(
    gt: &GroundTruthScene,
    dets: &[Detection],
    stack: &ResponseStack,
    space: &ShapeSpace,
    catalog: &MaskCatalog,
    config: &InferenceConfig,
    variants: &[Variant],
    seed: u64,
) -> Result<Vec<InferenceResult>> {
    let inputs = SceneInputs {
        space,
        catalog,
        camera: &gt.camera,
        stack,
        cam_height: gt.ground_plane.cam_height,
    };
    variants
        .iter()
        .map(|v| {
            let mut cfg = config.clone();
            cfg.variant = *v;
            infer_scene(dets, &inputs, &cfg, scene_seed(seed, &gt.id), &gt.id)
        })
        .collect()
}

/// Runs every variant on every scene of `project`, writes the results into
/// the project's results directory and evaluates them.
pub fn run_ablation(project: &Project, variants: &[Variant], seed: u64) -> Result<EvalReport> {
    let space = project.load_space()?;
    let catalog = project.load_catalog()?;
    let config = &project.manifest.config.inference;
    let mut gts = Vec::with_capacity(project.manifest.scene_ids.len());
    let mut results: Vec<(Variant, Vec<InferenceResult>)> = variants.iter().map(|v| (*v, Vec::new())).collect();
    for id in &project.manifest.scene_ids {
        let dir = project.scene_dir(id);
        let gt = dir.load_scene()?;
        let dets = dir.load_detections()?;
        let stack = dir.load_stack()?;
        let rs = ablate_scene(&gt, &dets, &stack, &space, &catalog, config, variants, seed)?;
        for (r, (variant, out)) in rs.into_iter().zip(&mut results) {
            save_json(&project.result_path(variant, id), &r)?;
            out.push(r);
        }
        log::info!("scene {id} done");
        gts.push(gt);
    }
    evaluate(&gts, &results)
}
