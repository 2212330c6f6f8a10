//! Metric deformable wireframe model.
//!
//! A [`ShapeSpace`] is a linear shape model learned by PCA from a set of
//! corresponding wireframe exemplars: any wireframe is approximated by the
//! mean plus a weighted sum of the leading principal displacement fields,
//! each scaled by its standard deviation. Coefficients are therefore
//! expressed in standard-deviation units.
//!
//! Exemplars keep their real-world size (meters), so the model encodes
//! absolute scale and can be placed in a metric scene.

pub mod generator;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point3, Vector3};

pub use generator::{generate_exemplars, CarGenerator, CarParams, CAR_PART_COUNT};

/// One annotated wireframe: vertices are in the object frame (origin at the
/// vertex centroid, +x forward, +y up, +z left), in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireframeExemplar {
    pub id: String,
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl WireframeExemplar {
    /// Longitudinal extent along the object +x axis.
    pub fn length(&self) -> f64 {
        extent(&self.vertices, 0)
    }

    /// Checks face indices and the metric length bound of a car exemplar.
    pub fn validate_car(&self) -> Result<()> {
        check_faces(&self.faces, self.vertices.len())?;
        let len = self.length();
        if !(3.0..=6.0).contains(&len) {
            return Err(Error::Params(format!(
                "exemplar {} has length {len:.3} m outside [3, 6]",
                self.id
            )));
        }
        Ok(())
    }
}

/// A set of exemplars plus the semantic names of their vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub part_names: Vec<String>,
    pub exemplars: Vec<WireframeExemplar>,
}

/// Shape coefficients in standard-deviation units, one per principal component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeCoefficients(pub Vec<f64>);

impl ShapeCoefficients {
    pub fn zeros(rank: usize) -> Self {
        Self(vec![0.0; rank])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Clamps every coefficient into `[-limit, limit]`.
    pub fn clamped(mut self, limit: f64) -> Self {
        for s in &mut self.0 {
            *s = s.clamp(-limit, limit);
        }
        self
    }
}

/// Linear deformable wireframe model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpace {
    pub mean: Vec<Point3>,
    /// Unit-norm displacement fields, one per component, each with one
    /// vector per vertex.
    pub components: Vec<Vec<Vector3>>,
    /// Standard deviations, sorted descending.
    pub deviations: Vec<f64>,
    pub faces: Arc<[[usize; 3]]>,
    /// RMS per-vertex reconstruction error over the training set at this rank.
    pub residual_rms: f64,
    pub part_names: Vec<String>,
}

impl ShapeSpace {
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.len()
    }

    pub fn with_part_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.mean.len() {
            return Err(Error::Topology(format!(
                "{} part names for {} vertices",
                names.len(),
                self.mean.len()
            )));
        }
        self.part_names = names;
        Ok(self)
    }

    /// Evaluates `mean + sum_k s_k * sigma_k * p_k`.
    pub fn instantiate(&self, s: &ShapeCoefficients) -> Result<Vec<Point3>> {
        if s.len() != self.rank() {
            return Err(Error::CoefficientCount {
                expected: self.rank(),
                got: s.len(),
            });
        }
        let mut out = self.mean.clone();
        for ((component, sigma), coeff) in self.components.iter().zip(&self.deviations).zip(&s.0) {
            let w = coeff * sigma;
            if w == 0.0 {
                continue;
            }
            for (p, d) in out.iter_mut().zip(component) {
                *p += d * w;
            }
        }
        Ok(out)
    }

    /// Projects a wireframe onto the components, returning coefficients in
    /// standard-deviation units. Components with zero deviation get 0.
    pub fn project(&self, wireframe: &[Point3]) -> Result<ShapeCoefficients> {
        if wireframe.len() != self.vertex_count() {
            return Err(Error::Topology(format!(
                "wireframe has {} vertices, model has {}",
                wireframe.len(),
                self.vertex_count()
            )));
        }
        let coeffs = self
            .components
            .iter()
            .zip(&self.deviations)
            .map(|(component, &sigma)| {
                let dot: f64 = wireframe
                    .iter()
                    .zip(&self.mean)
                    .zip(component)
                    .map(|((x, m), d)| (x - m).dot(d))
                    .sum();
                if sigma > 0.0 {
                    dot / sigma
                } else {
                    0.0
                }
            })
            .collect();
        Ok(ShapeCoefficients(coeffs))
    }

    /// Height of the vertex centroid above the ground contact of `wireframe`.
    pub fn centroid_height(wireframe: &[Point3]) -> f64 {
        let n = wireframe.len() as f64;
        let cy = wireframe.iter().map(|p| p.y).sum::<f64>() / n;
        cy - ground_contact(wireframe)
    }
}

/// Mean height of the four lowest vertices (ties broken by index).
pub fn ground_contact(wireframe: &[Point3]) -> f64 {
    let mut idx: Vec<usize> = (0..wireframe.len()).collect();
    idx.sort_by(|&a, &b| wireframe[a].y.total_cmp(&wireframe[b].y).then(a.cmp(&b)));
    let k = idx.len().min(4);
    idx[..k].iter().map(|&i| wireframe[i].y).sum::<f64>() / k as f64
}

fn extent(points: &[Point3], axis: usize) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p[axis]), hi.max(p[axis]))
    });
    hi - lo
}

fn check_faces(faces: &[[usize; 3]], m: usize) -> Result<()> {
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= m)) {
        return Err(Error::Topology(format!("face {f:?} references a vertex >= {m}")));
    }
    Ok(())
}

fn flatten(points: &[Point3]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

/// Fits a rank-`rank` PCA shape space to corresponding exemplars.
///
/// Uses the population covariance of the flattened, centered exemplars and
/// orients each component so that its largest-magnitude entry is positive.
pub fn fit_shape_space(exemplars: &[WireframeExemplar], rank: usize) -> Result<ShapeSpace> {
    let first = exemplars.first().ok_or(Error::EmptyExemplars)?;
    if exemplars.len() < 2 {
        return Err(Error::Params("at least two exemplars are required".into()));
    }
    let m = first.vertices.len();
    check_faces(&first.faces, m)?;
    for ex in exemplars {
        if ex.vertices.len() != m {
            return Err(Error::Topology(format!(
                "exemplar {} has {} vertices, expected {m}",
                ex.id,
                ex.vertices.len()
            )));
        }
        if ex.faces != first.faces {
            return Err(Error::Topology(format!("exemplar {} has a different face list", ex.id)));
        }
    }
    let dim = 3 * m;
    let available = dim.min(exemplars.len() - 1);
    if rank == 0 || rank > available {
        return Err(Error::Rank {
            requested: rank,
            available,
        });
    }

    let n = exemplars.len() as f64;
    let rows: Vec<DVector<f64>> = exemplars.iter().map(|e| flatten(&e.vertices)).collect();
    let mean = rows.iter().fold(DVector::zeros(dim), |acc, r| acc + r) / n;
    let centered = DMatrix::from_fn(exemplars.len(), dim, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(rank);
    let mut deviations = Vec::with_capacity(rank);
    let mut basis = DMatrix::zeros(dim, rank);
    for (k, &col) in order.iter().take(rank).enumerate() {
        let mut v = eig.eigenvectors.column(col).into_owned();
        v /= v.norm();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v = -v;
        }
        basis.set_column(k, &v);
        components.push(
            (0..m)
                .map(|i| Vector3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]))
                .collect::<Vec<_>>(),
        );
        deviations.push(eig.eigenvalues[col].max(0.0).sqrt());
    }

    // Residual of projecting every exemplar onto the retained subspace.
    let coeffs = &centered * &basis;
    let recon = &coeffs * basis.transpose();
    let residual = (&centered - recon).norm_squared();
    let residual_rms = (residual / (n * m as f64)).sqrt();

    let mean_pts = (0..m)
        .map(|i| Point3::new(mean[3 * i], mean[3 * i + 1], mean[3 * i + 2]))
        .collect();
    Ok(ShapeSpace {
        mean: mean_pts,
        components,
        deviations,
        faces: first.faces.clone().into(),
        residual_rms,
        part_names: (0..m).map(|i| format!("part_{i:02}")).collect(),
    })
}

/// Returns the id of the exemplar closest to `wireframe` in flattened
/// Euclidean distance; ties go to the lexicographically smallest id.
pub fn nearest_exemplar<'a>(
    space: &ShapeSpace,
    exemplars: &'a [WireframeExemplar],
    wireframe: &[Point3],
) -> Result<&'a str> {
    if exemplars.is_empty() {
        return Err(Error::EmptyExemplars);
    }
    if wireframe.len() != space.vertex_count() {
        return Err(Error::Topology(format!(
            "query has {} vertices, model has {}",
            wireframe.len(),
            space.vertex_count()
        )));
    }
    let mut best: Option<(f64, &str)> = None;
    for ex in exemplars {
        if ex.vertices.len() != wireframe.len() {
            return Err(Error::Topology(format!("exemplar {} vertex count differs", ex.id)));
        }
        let d2: f64 = ex
            .vertices
            .iter()
            .zip(wireframe)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        best = match best {
            Some((bd, bid)) if bd < d2 || (bd == d2 && bid <= ex.id.as_str()) => Some((bd, bid)),
            _ => Some((d2, ex.id.as_str())),
        };
    }
    Ok(best.map(|(_, id)| id).unwrap_or_default())
}
