mod common;

use common::{catalog, space};
use scenewire::evaluation::*;
use scenewire::evidence::{apparent_azimuth, synth_predetections, Detection, DetectionNoise, GroundTruthScene};
use scenewire::geometry::{BBox2, ObjectPose};
use scenewire::inference::{infer_scene, InferenceConfig, SceneInputs, Variant};
use scenewire::io::{synth_scene_inputs, ModuleConfigs};
use scenewire::masks::PartState;
use scenewire::{Point2, Point3};

fn record(centroid: Point3, azimuth: f64, parts: Vec<Point2>, states: Vec<PartState>) -> ObjectRecord {
    let pose = ObjectPose::new(centroid.x, centroid.z, azimuth);
    ObjectRecord {
        centroid,
        azimuth,
        apparent_azimuth: apparent_azimuth(&pose),
        parts_px: parts,
        states,
    }
}

fn pair(i: usize, truth: ObjectRecord, estimate: Option<ObjectRecord>, occluded: usize) -> Pair {
    Pair {
        scene_id: "s".into(),
        gt_index: i,
        detection: i,
        occluded_parts: occluded,
        length_px: 500.0,
        truth,
        estimate,
    }
}

fn simple(i: usize, error: Option<f64>) -> Pair {
    let c = Point3::new(0.0, -1.0, 10.0);
    let t = record(c, 0.0, vec![Point2::origin()], vec![PartState::Visible]);
    let e = error.map(|d| {
        record(
            c + nalgebra::Vector3::new(d, 0.0, 0.0),
            0.0,
            vec![Point2::origin()],
            vec![PartState::Visible],
        )
    });
    pair(i, t, e, 0)
}

#[test]
fn planted_centroid_errors_give_hand_counted_metrics() {
    let pairs = vec![
        simple(0, Some(0.5)),
        simple(1, Some(1.2)),
        simple(2, Some(1.6)),
        simple(3, None),
    ];
    let m = Metrics::compute(&pairs).unwrap();
    assert_eq!(m.pairs, 4);
    assert_eq!(m.missing, 1);
    assert_eq!(m.loc_1m, 0.25);
    assert_eq!(m.loc_1_5m, 0.5);
    assert!((m.median_centroid_error_m.unwrap() - 1.2).abs() < 1e-12);
    // The missing estimate counts as a 180 degree miss.
    assert_eq!(m.vp_5deg, 0.75);
    assert_eq!(m.median_azimuth_3d_deg, 0.0);
    assert!(Metrics::compute(&[]).is_err());
}

#[test]
fn medians_average_the_middle_pair() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    assert_eq!(median(&[]), None);
}

#[test]
fn a_lateral_shift_changes_apparent_but_not_global_azimuth() {
    let parts = vec![Point2::origin()];
    let states = vec![PartState::Visible];
    let truth = record(Point3::new(2.0, -1.0, 10.0), 0.0, parts.clone(), states.clone());
    let est = record(Point3::new(0.0, -1.0, 10.0), 0.0, parts, states);
    let p = pair(0, truth, Some(est), 0);
    assert!(p.azimuth_error_deg().abs() < 1e-12);
    let bearing = (0.2f64).atan().to_degrees();
    assert!((p.apparent_error_deg() - bearing).abs() < 1e-9);
    assert!((bearing - 11.31).abs() < 0.01);
}

fn part_pair(shift: f64, shifted: usize) -> Pair {
    let n = 10;
    let truth_px: Vec<Point2> = (0..n).map(|j| Point2::new(50.0 * j as f64, 100.0)).collect();
    let est_px: Vec<Point2> = truth_px
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if j < shifted {
                Point2::new(p.x, p.y + shift)
            } else {
                Point2::new(p.x, p.y + 100.0)
            }
        })
        .collect();
    let states = vec![PartState::Visible; n];
    let c = Point3::new(0.0, -1.0, 10.0);
    pair(
        0,
        record(c, 0.0, truth_px, states.clone()),
        Some(record(c, 0.0, est_px, states)),
        0,
    )
}

#[test]
fn parts_count_within_four_percent_of_the_car_length() {
    assert_eq!(part_localization(&[part_pair(19.0, 7)]), Some(1.0));
    assert_eq!(part_localization(&[part_pair(21.0, 7)]), Some(0.0));
    assert_eq!(part_localization(&[part_pair(19.0, 6)]), Some(0.0));
    // Cars with too few visible parts are not eligible.
    let mut hidden = part_pair(0.0, 10);
    for s in hidden.truth.states.iter_mut().take(4) {
        *s = PartState::MaskOccluded;
    }
    assert_eq!(part_localization(&[hidden]), None);
}

#[test]
fn predicting_everything_visible_scores_the_visible_fraction() {
    let m = 12;
    let k = 5;
    let mut states = vec![PartState::Visible; m + 3];
    for s in states.iter_mut().take(k) {
        *s = PartState::MaskOccluded;
    }
    for s in states.iter_mut().skip(m) {
        *s = PartState::SelfOccluded;
    }
    let px = vec![Point2::origin(); m + 3];
    let c = Point3::new(0.0, -1.0, 10.0);
    let truth = record(c, 0.0, px.clone(), states.clone());
    let all_visible: Vec<PartState> = states
        .iter()
        .map(|s| {
            if *s == PartState::MaskOccluded {
                PartState::Visible
            } else {
                *s
            }
        })
        .collect();
    let fg = pair(0, truth.clone(), Some(record(c, 0.0, px.clone(), all_visible)), k);
    assert_eq!(occlusion_accuracy(&[fg]), Some((m - k) as f64 / m as f64));
    let missing = pair(0, truth.clone(), None, k);
    assert_eq!(occlusion_accuracy(&[missing]), Some((m - k) as f64 / m as f64));
    let perfect = pair(0, truth, Some(record(c, 0.0, px, states)), k);
    assert_eq!(occlusion_accuracy(&[perfect]), Some(1.0));
}

#[test]
fn sign_test_matches_the_binomial_tail() {
    let tail = |w: u64, n: u64| {
        let mut p = 0.0;
        for k in w..=n {
            let mut c = 1.0f64;
            for i in 0..k {
                c = c * (n - i) as f64 / (i + 1) as f64;
            }
            p += c * 0.5f64.powi(n as i32);
        }
        p
    };
    for (w, l) in [(32, 20), (38, 14), (25, 26), (5, 0), (1, 1)] {
        assert!((sign_test_p(w, l) - tail(w as u64, (w + l) as u64)).abs() < 1e-12);
    }
    assert_eq!(sign_test_p(0, 7), 1.0);
    let better = vec![
        simple(0, Some(0.1)),
        simple(1, Some(0.5)),
        simple(2, Some(0.3)),
        simple(3, None),
    ];
    let worse = vec![
        simple(0, Some(0.2)),
        simple(1, Some(0.4)),
        simple(2, Some(0.3)),
        simple(3, Some(0.1)),
    ];
    let t = sign_test(Variant::FULL, &better, Variant::FG_GP, &worse);
    assert_eq!((t.wins, t.losses, t.ties), (1, 1, 1));
}

#[test]
fn strata_nest() {
    for k in 0..10 {
        assert!(Stratum::All.contains(k));
        assert_eq!(Stratum::Occluded.contains(k), k >= 1);
        assert_eq!(Stratum::Severe.contains(k), k >= 4);
    }
}

fn scene() -> (GroundTruthScene, Vec<Detection>, scenewire::evidence::ResponseStack) {
    synth_scene_inputs(&ModuleConfigs::benchmark(), space(), 77, "eval").unwrap()
}

/// Largest number of cars matchable to distinct detections under the gates.
fn max_matching(dets: &[Detection], gt: &GroundTruthScene, gated: &dyn Fn(&Detection, usize) -> bool) -> usize {
    fn go(d: usize, dets: &[Detection], used: &mut Vec<bool>, gated: &dyn Fn(&Detection, usize) -> bool) -> usize {
        if d == dets.len() {
            return 0;
        }
        let mut best = go(d + 1, dets, used, gated);
        for g in 0..used.len() {
            if !used[g] && gated(&dets[d], g) {
                used[g] = true;
                best = best.max(1 + go(d + 1, dets, used, gated));
                used[g] = false;
            }
        }
        best
    }
    go(0, dets, &mut vec![false; gt.objects.len()], gated)
}

#[test]
fn greedy_matching_finds_every_separable_true_positive() {
    for seed in 0..20 {
        let (gt, _, _) = synth_scene_inputs(&ModuleConfigs::benchmark(), space(), seed, "m").unwrap();
        let noise = DetectionNoise {
            center_jitter_px: 4.0,
            scale_jitter: 0.1,
            flip_prob: 0.2,
            score: [0.0, 1.0],
        };
        let mut dets = synth_predetections(&gt, &noise, seed).unwrap();
        dets.push(Detection {
            bbox: BBox2::new(0.0, 0.0, 30.0, 30.0),
            viewpoint: 0,
            score: 0.99,
        });
        let matches = match_tps(&dets, &gt);
        let gated = |d: &Detection, g: usize| {
            let o = &gt.objects[g];
            let vp = scenewire::geometry::angle_diff(
                scenewire::evidence::bin_center(d.viewpoint),
                apparent_azimuth(&o.pose),
            );
            d.bbox.iou(&o.bbox) > IOU_GATE && vp.to_degrees() <= VIEWPOINT_GATE_DEG + 1e-9
        };
        for m in &matches {
            assert!(gated(&dets[m.detection], m.gt));
        }
        let mut gts: Vec<usize> = matches.iter().map(|m| m.gt).collect();
        gts.dedup();
        assert_eq!(gts.len(), matches.len());
        let mut ds: Vec<usize> = matches.iter().map(|m| m.detection).collect();
        ds.sort();
        ds.dedup();
        assert_eq!(ds.len(), matches.len());
        assert_eq!(matches.len(), max_matching(&dets, &gt, &gated), "seed {seed}");
    }
}

#[test]
fn a_perfect_estimate_scores_perfectly() {
    let (gt, dets, stack) = scene();
    let inputs = SceneInputs {
        space: space(),
        catalog: catalog(),
        camera: &gt.camera,
        stack: &stack,
        cam_height: gt.ground_plane.cam_height,
    };
    let cfg = InferenceConfig {
        n_particles: 2,
        iterations: 1,
        n_samples: 4,
        ..InferenceConfig::default()
    };
    let r = infer_scene(&dets, &inputs, &cfg, 1, &gt.id).unwrap();
    let mut perfect = r.clone();
    for m in match_tps(&perfect.detections, &gt) {
        let o = &gt.objects[m.gt];
        let k = perfect
            .scene
            .objects
            .iter()
            .position(|h| h.detection == Some(m.detection))
            .unwrap();
        perfect.scene.objects[k].pose = o.pose;
        perfect.objects[k].centroid = o.centroid;
        perfect.objects[k].parts_px = o.parts_px.clone();
        perfect.objects[k].states = o.states.clone();
    }
    let report = evaluate(
        std::slice::from_ref(&gt),
        &[(Variant::FULL, vec![perfect]), (Variant::FG_GP, vec![r])],
    )
    .unwrap();
    let m = report.metrics(Variant::FULL, Stratum::All).unwrap();
    assert_eq!(m.loc_1m, 1.0);
    assert_eq!(m.vp_5deg, 1.0);
    assert_eq!(m.occlusion_accuracy, Some(1.0));
    assert_eq!(m.median_centroid_error_m, Some(0.0));
    assert!(m.part_localization.is_none_or(|p| p == 1.0));
    assert_eq!(report.sign_tests.len(), 1);
    assert!(report.to_table().contains("fg+gp+do+so"));
    let missing = evaluate(std::slice::from_ref(&gt), &[(Variant::FULL, vec![])]);
    assert!(missing.is_err());
}
