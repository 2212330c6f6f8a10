//! Lifting 2D detections to coarse 3D scene particles by grid search.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::evidence::{bin_center, Detection};
use crate::geometry::{place_wireframe, BBox2, Camera, GroundPlane, ObjectPose};
use crate::likelihood::{ObjectHypothesis, SceneHypothesis};
use crate::shape::{ShapeCoefficients, ShapeSpace};
use crate::Point3;

use super::config::{symmetric_grid, CoarseGrid, InferenceConfig};
use super::refine::SceneParticle;

/// A placement of the mean shape consistent with one detection.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftCandidate {
    pub pose: ObjectPose,
    /// Per-object support plane when the height is free.
    pub support: Option<GroundPlane>,
    pub iou: f64,
}

fn projected_box(wire: &[Point3], pose: &ObjectPose, gp: &GroundPlane, cam: &Camera) -> Option<BBox2> {
    let placed = place_wireframe(wire, pose, gp);
    if placed.iter().any(|p| p.z <= 0.1) {
        return None;
    }
    let px = cam.project(&placed).ok()?;
    BBox2::from_points(&px)
}

/// Places the mean shape along the ray through the detection center on
/// plane `gp` and grid-searches depth and azimuth for the best box overlap.
/// With `free_height` the camera height above the object's own plane is
/// solved so that the object center lies on the ray. Returns consistent
/// candidates, best first.
pub fn lift_detection(
    det: &Detection,
    gp: &GroundPlane,
    free_height: bool,
    mean: &[Point3],
    cam: &Camera,
    grid: &CoarseGrid,
) -> Vec<LiftCandidate> {
    let ray_c = cam.pixel_ray(&det.bbox.center());
    let ray_g = gp.rotation().inverse() * ray_c;
    if ray_g.z <= 1e-6 || !(det.bbox.height() > 0.0) {
        return Vec::new();
    }
    let bearing = ray_g.x.atan2(ray_g.z);
    let az0 = bin_center(det.viewpoint) + bearing;
    let center_height = ShapeSpace::centroid_height(mean);
    let at_depth = |d: f64| {
        let t = d / ray_g.z;
        let pose_x = ray_g.x * t;
        let plane = if free_height {
            let h = center_height - ray_g.y * t;
            if h <= 0.2 {
                return None;
            }
            GroundPlane { cam_height: h, ..*gp }
        } else {
            *gp
        };
        Some((pose_x, plane))
    };
    let mut out = Vec::new();
    for daz in symmetric_grid(grid.azimuth_radius_deg, grid.azimuth_step_deg) {
        let az = az0 + daz.to_radians();
        let Some((xr, plane_r)) = at_depth(grid.reference_depth) else {
            continue;
        };
        let Some(reference) = projected_box(mean, &ObjectPose::new(xr, grid.reference_depth, az), &plane_r, cam) else {
            continue;
        };
        let d0 = grid.reference_depth * reference.height() / det.bbox.height();
        for dd in symmetric_grid(grid.depth_radius, grid.depth_step) {
            let d = d0 + dd;
            if d <= 1.0 {
                continue;
            }
            let Some((x, plane)) = at_depth(d) else { continue };
            let pose = ObjectPose::new(x, d, az);
            let Some(b) = projected_box(mean, &pose, &plane, cam) else {
                continue;
            };
            let iou = b.iou(&det.bbox);
            if iou >= grid.min_iou {
                out.push(LiftCandidate {
                    pose,
                    support: free_height.then_some(plane),
                    iou,
                });
            }
        }
    }
    out.sort_by(|a, b| b.iou.total_cmp(&a.iou));
    out
}

/// The `k` index tuples with the largest summed scores, one index per
/// list; each list must be sorted in descending order. Ties resolve to the
/// lexicographically smaller tuple.
pub fn k_best_combinations(lists: &[Vec<f64>], k: usize) -> Vec<(f64, Vec<usize>)> {
    if lists.is_empty() || lists.iter().any(|l| l.is_empty()) || k == 0 {
        return Vec::new();
    }
    let score = |idx: &[usize]| idx.iter().zip(lists).map(|(&i, l)| l[i]).sum::<f64>();
    let start = vec![0; lists.len()];
    let mut frontier = vec![(score(&start), start.clone())];
    let mut seen = BTreeSet::from([start]);
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !frontier.is_empty() {
        let mut best = 0;
        for (i, (s, idx)) in frontier.iter().enumerate() {
            let (bs, bidx) = &frontier[best];
            if *s > *bs || (*s == *bs && idx < bidx) {
                best = i;
            }
        }
        let (s, idx) = frontier.swap_remove(best);
        for d in 0..idx.len() {
            if idx[d] + 1 < lists[d].len() {
                let mut next = idx.clone();
                next[d] += 1;
                if seen.insert(next.clone()) {
                    frontier.push((score(&next), next));
                }
            }
        }
        out.push((s, idx));
    }
    out
}

struct Combo {
    score: f64,
    plane: GroundPlane,
    objects: Vec<ObjectHypothesis>,
}

fn combos_for(per_det: &[(usize, Vec<LiftCandidate>)], plane: GroundPlane, rank: usize, k: usize) -> Vec<Combo> {
    let kept: Vec<&(usize, Vec<LiftCandidate>)> = per_det.iter().filter(|(_, c)| !c.is_empty()).collect();
    for (i, c) in per_det {
        if c.is_empty() {
            log::debug!("detection {i} has no consistent placement on plane {plane:?}; dropped");
        }
    }
    if kept.is_empty() {
        return Vec::new();
    }
    let lists: Vec<Vec<f64>> = kept.iter().map(|(_, c)| c.iter().map(|x| x.iou).collect()).collect();
    k_best_combinations(&lists, k)
        .into_iter()
        .map(|(score, idx)| Combo {
            score,
            plane,
            objects: kept
                .iter()
                .zip(&idx)
                .map(|((det, cands), &i)| ObjectHypothesis {
                    pose: cands[i].pose,
                    shape: ShapeCoefficients::zeros(rank),
                    mask_id: 0,
                    support: cands[i].support,
                    detection: Some(*det),
                })
                .collect(),
        })
        .collect()
}

/// Lifts detections into at most `n_particles` scene particles. With a
/// shared ground plane every particle holds one plane from the pitch/roll
/// grid; without one each object carries its own support plane.
pub fn coarse_lift(
    dets: &[Detection],
    cam: &Camera,
    cam_height: f64,
    space: &ShapeSpace,
    config: &InferenceConfig,
) -> Result<Vec<SceneParticle>> {
    if dets.is_empty() {
        return Err(Error::EmptyScene);
    }
    let grid = &config.coarse;
    let k = config.n_particles;
    let mut planes = Vec::new();
    for pitch in symmetric_grid(grid.pitch_deg, grid.pitch_step_deg) {
        for roll in symmetric_grid(grid.roll_deg, grid.roll_step_deg) {
            planes.push(GroundPlane {
                pitch: pitch.to_radians(),
                roll: roll.to_radians(),
                cam_height,
            });
        }
    }
    let rank = space.rank();
    let mut combos: Vec<Combo> = Vec::new();
    if config.variant.ground_plane {
        // Particles are dealt out round-robin over planes, best combination
        // of each plane first, so the plane grid stays covered.
        let mut per_plane: Vec<std::collections::VecDeque<Combo>> = Vec::with_capacity(planes.len());
        for plane in &planes {
            let per_det: Vec<(usize, Vec<LiftCandidate>)> = dets
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let mut c = lift_detection(d, plane, false, &space.mean, cam, grid);
                    c.truncate(grid.per_detection);
                    (i, c)
                })
                .collect();
            per_plane.push(combos_for(&per_det, *plane, rank, k).into());
        }
        while combos.len() < k && per_plane.iter().any(|q| !q.is_empty()) {
            let mut round: Vec<Combo> = per_plane.iter_mut().filter_map(|q| q.pop_front()).collect();
            round.sort_by(|a, b| b.score.total_cmp(&a.score));
            combos.extend(round);
        }
    } else {
        let per_det: Vec<(usize, Vec<LiftCandidate>)> = dets
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut all: Vec<LiftCandidate> = planes
                    .iter()
                    .flat_map(|p| {
                        let mut c = lift_detection(d, p, true, &space.mean, cam, grid);
                        c.truncate(grid.per_detection);
                        c
                    })
                    .collect();
                all.sort_by(|a, b| b.iou.total_cmp(&a.iou));
                all.truncate(k.max(grid.per_detection));
                (i, all)
            })
            .collect();
        combos.extend(combos_for(&per_det, GroundPlane::flat(cam_height), rank, k));
    }
    combos.truncate(k);
    if combos.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(combos
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            SceneParticle::new(
                SceneHypothesis {
                    ground_plane: c.plane,
                    objects: c.objects,
                    score: c.score,
                },
                config,
                i as u64,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_best_enumerates_in_order() {
        let lists = vec![vec![3.0, 2.0, 0.0], vec![1.0, 0.5]];
        let out = k_best_combinations(&lists, 4);
        let scores: Vec<f64> = out.iter().map(|(s, _)| *s).collect();
        assert_eq!(scores, vec![4.0, 3.5, 3.0, 2.5]);
        assert_eq!(out[0].1, vec![0, 0]);
        assert_eq!(out[2].1, vec![1, 0]);
        assert_eq!(k_best_combinations(&lists, 100).len(), 6);
    }
}
