mod common;

use common::{exemplars, space};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scenewire::shape::{fit_shape_space, nearest_exemplar, ShapeCoefficients, WireframeExemplar};
use scenewire::Point3;

fn data_matrix(set: &[WireframeExemplar]) -> (DMatrix<f64>, DVector<f64>) {
    let dim = set[0].vertices.len() * 3;
    let raw = DMatrix::from_fn(set.len(), dim, |i, j| set[i].vertices[j / 3][j % 3]);
    let mean = DVector::from_fn(dim, |j, _| raw.column(j).mean());
    let centered = DMatrix::from_fn(set.len(), dim, |i, j| raw[(i, j)] - mean[j]);
    (centered, mean)
}

fn flat(points: &[Point3]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

fn basis(k: usize) -> DVector<f64> {
    let c = &space().components[k];
    DVector::from_iterator(c.len() * 3, c.iter().flat_map(|d| [d.x, d.y, d.z]))
}

#[test]
fn fit_matches_an_svd_of_the_centered_data() {
    let set = &exemplars().exemplars;
    let n = set.len() as f64;
    let m = set[0].vertices.len() as f64;
    let (centered, mean) = data_matrix(set);
    let svd = centered.clone().svd(false, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vt = svd.v_t.unwrap();
    let s = space();
    assert!((flat(&s.mean) - mean).amax() < 1e-12);
    for (k, &idx) in order.iter().take(s.rank()).enumerate() {
        let sv = svd.singular_values[idx];
        assert!((s.deviations[k] - sv / n.sqrt()).abs() < 1e-9, "sigma {k}");
        let oracle = vt.row(idx).transpose();
        let ours = basis(k);
        assert!((ours.dot(&oracle).abs() - 1.0).abs() < 1e-8, "component {k} direction");
    }
    let tail: f64 = order[s.rank()..].iter().map(|&i| svd.singular_values[i].powi(2)).sum();
    let rms = (tail / (n * m)).sqrt();
    assert!((s.residual_rms - rms).abs() < 1e-9, "{} vs {rms}", s.residual_rms);
}

#[test]
fn components_are_orthonormal_and_sign_fixed() {
    let s = space();
    for a in 0..s.rank() {
        let va = basis(a);
        let pivot = va.iamax();
        assert!(va[pivot] > 0.0);
        for b in 0..s.rank() {
            let d = va.dot(&basis(b));
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((d - want).abs() < 1e-10);
        }
    }
    assert!(s.deviations.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn instantiate_agrees_with_a_dense_matrix_product() {
    let s = space();
    let coeffs = ShapeCoefficients(vec![1.5, -0.7, 0.3, 2.0, -1.1]);
    let dim = s.vertex_count() * 3;
    let p = DMatrix::from_fn(dim, s.rank(), |i, k| basis(k)[i]);
    let w = DVector::from_fn(s.rank(), |k, _| coeffs.0[k] * s.deviations[k]);
    let oracle = flat(&s.mean) + p * w;
    let ours = flat(&s.instantiate(&coeffs).unwrap());
    assert!((ours - oracle).amax() < 1e-12);
    assert!(s.instantiate(&ShapeCoefficients(vec![0.0; 3])).is_err());
}

#[test]
fn projection_inverts_instantiation() {
    let s = space();
    let coeffs = ShapeCoefficients(vec![0.4, -2.0, 1.0, 0.0, 0.9]);
    let back = s.project(&s.instantiate(&coeffs).unwrap()).unwrap();
    for (a, b) in back.0.iter().zip(&coeffs.0) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn noisy_exemplars_find_themselves() {
    let set = &exemplars().exemplars;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.005).unwrap();
    for ex in set {
        let query: Vec<Point3> = ex
            .vertices
            .iter()
            .map(|p| p + nalgebra::Vector3::from_fn(|_, _| noise.sample(&mut rng)))
            .collect();
        assert_eq!(nearest_exemplar(space(), set, &query).unwrap(), ex.id);
    }
}

#[test]
fn rank_beyond_the_data_is_rejected() {
    let set = &exemplars().exemplars;
    assert!(fit_shape_space(set, set.len()).is_err());
    assert!(fit_shape_space(set, 0).is_err());
    assert!(fit_shape_space(&set[..1], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instantiation_is_affine_in_the_coefficients(
        a in prop::collection::vec(-3.0f64..3.0, 5),
        b in prop::collection::vec(-3.0f64..3.0, 5),
        t in -2.0f64..2.0,
    ) {
        let s = space();
        let mix = ShapeCoefficients(a.iter().zip(&b).map(|(x, y)| x + t * y).collect());
        let fa = flat(&s.instantiate(&ShapeCoefficients(a.clone())).unwrap());
        let fb = flat(&s.instantiate(&ShapeCoefficients(b.clone())).unwrap());
        let f0 = flat(&s.mean);
        let fm = flat(&s.instantiate(&mix).unwrap());
        prop_assert!((fm - (&fa + (fb - &f0) * t)).amax() < 1e-9);
    }
}
