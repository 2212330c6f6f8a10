//! Agglomerative merging of sub-category detector activations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox2;
use crate::Point2;

use super::responses::Detection;

/// A detector firing: the box of the configuration's own (possibly partial)
/// template, mapped to a full-object box through stored offsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub config_id: u32,
    pub bbox: BBox2,
    pub viewpoint: u8,
    pub score: f64,
}

/// Full-object box relative to an activation box: size scaled by
/// `(scale_w, scale_h)`, center shifted by `(dx, dy)` activation widths/heights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigOffset {
    pub scale_w: f64,
    pub scale_h: f64,
    pub dx: f64,
    pub dy: f64,
}

impl ConfigOffset {
    pub const IDENTITY: ConfigOffset = ConfigOffset {
        scale_w: 1.0,
        scale_h: 1.0,
        dx: 0.0,
        dy: 0.0,
    };

    pub fn full_box(&self, b: &BBox2) -> BBox2 {
        let c = b.center();
        BBox2::from_center(
            Point2::new(c.x + self.dx * b.width(), c.y + self.dy * b.height()),
            b.width() * self.scale_w,
            b.height() * self.scale_h,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeGate {
    /// Maximum center distance as a fraction of the mean box diagonal.
    pub center_frac: f64,
    /// Maximum ratio between box diagonals.
    pub max_scale_ratio: f64,
}

impl Default for MergeGate {
    fn default() -> Self {
        Self {
            center_frac: 0.3,
            max_scale_ratio: 1.4,
        }
    }
}

struct Cluster {
    members: Vec<BBox2>,
    bbox: BBox2,
    viewpoint: u8,
    score: f64,
}

impl Cluster {
    fn absorb(&mut self, other: Cluster) {
        self.members.extend(other.members);
        let n = self.members.len() as f64;
        let sum = self.members.iter().fold([0.0; 4], |a, b| {
            [a[0] + b.min_u, a[1] + b.min_v, a[2] + b.max_u, a[3] + b.max_v]
        });
        self.bbox = BBox2::new(sum[0] / n, sum[1] / n, sum[2] / n, sum[3] / n);
        self.score = self.score.max(other.score);
    }
}

/// Normalized distance between two clusters if they may merge.
fn gate_distance(a: &Cluster, b: &Cluster, gate: &MergeGate) -> Option<f64> {
    if a.viewpoint != b.viewpoint {
        return None;
    }
    let (da, db) = (a.bbox.diagonal(), b.bbox.diagonal());
    let ratio = da / db;
    if !(ratio >= 1.0 / gate.max_scale_ratio && ratio <= gate.max_scale_ratio) {
        return None;
    }
    let mean = (da + db) / 2.0;
    let dist = (a.bbox.center() - b.bbox.center()).norm() / mean;
    (dist < gate.center_frac).then_some(dist)
}

/// Maps activations to full-object boxes and merges the closest qualifying
/// pair until none remains; a merged box averages its members' corners and
/// keeps their highest score. Clusters below `threshold` are dropped.
/// Output is sorted by descending score.
pub fn merge_activations(
    acts: &[Activation],
    offsets: &BTreeMap<u32, ConfigOffset>,
    threshold: f64,
    gate: &MergeGate,
) -> Result<Vec<Detection>> {
    let mut clusters = Vec::with_capacity(acts.len());
    for a in acts {
        let off = offsets.get(&a.config_id).ok_or(Error::UnknownConfig(a.config_id))?;
        let bbox = off.full_box(&a.bbox);
        clusters.push(Cluster {
            members: vec![bbox],
            bbox,
            viewpoint: a.viewpoint,
            score: a.score,
        });
    }
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if let Some(d) = gate_distance(&clusters[i], &clusters[j], gate) {
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, i, j));
                    }
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let other = clusters.remove(j);
        clusters[i].absorb(other);
    }
    let mut out: Vec<Detection> = clusters
        .into_iter()
        .filter(|c| c.score >= threshold)
        .map(|c| Detection {
            bbox: c.bbox,
            viewpoint: c.viewpoint,
            score: c.score,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}
