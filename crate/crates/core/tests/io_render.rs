mod common;

use common::{catalog, clean_stack, exemplars, space};
use scenewire::evidence::{synth_scene, GroundTruthScene, SynthConfig};
use scenewire::geometry::ObjectPose;
use scenewire::inference::{infer_scene, InferenceConfig, InferenceResult, SceneInputs};
use scenewire::io::*;
use scenewire::masks::MaskCatalog;
use scenewire::render::*;
use scenewire::shape::{ExemplarSet, ShapeSpace};
use scenewire::Error;

fn gt() -> GroundTruthScene {
    synth_scene(&SynthConfig::default(), space(), 31, "io").unwrap()
}

fn result(gt: &GroundTruthScene) -> InferenceResult {
    let stack = clean_stack(gt);
    let inputs = SceneInputs {
        space: space(),
        catalog: catalog(),
        camera: &gt.camera,
        stack: &stack,
        cam_height: gt.ground_plane.cam_height,
    };
    let dets = scenewire::evidence::synth_predetections(gt, &Default::default(), 1).unwrap();
    let cfg = InferenceConfig {
        n_particles: 2,
        iterations: 1,
        n_samples: 3,
        ..InferenceConfig::default()
    };
    infer_scene(&dets, &inputs, &cfg, 3, &gt.id).unwrap()
}

#[test]
fn artifacts_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let g = gt();
    let r = result(&g);
    let p = dir.path();
    save_json(&p.join("space.json"), space()).unwrap();
    save_json(&p.join("masks.json"), catalog()).unwrap();
    save_json(&p.join("scene.json"), &g).unwrap();
    save_json(&p.join("result.json"), &r).unwrap();
    save_json(&p.join("ex.json"), exemplars()).unwrap();
    save_json(&p.join("dets.json"), &r.detections).unwrap();
    assert_eq!(&load_json::<ShapeSpace>(&p.join("space.json")).unwrap(), space());
    assert_eq!(&load_json::<MaskCatalog>(&p.join("masks.json")).unwrap(), catalog());
    assert_eq!(load_json::<GroundTruthScene>(&p.join("scene.json")).unwrap(), g);
    assert_eq!(load_json::<InferenceResult>(&p.join("result.json")).unwrap(), r);
    assert_eq!(&load_json::<ExemplarSet>(&p.join("ex.json")).unwrap(), exemplars());
    assert_eq!(
        load_json::<Vec<scenewire::evidence::Detection>>(&p.join("dets.json")).unwrap(),
        r.detections
    );
    // Saving again writes the same bytes.
    let first = std::fs::read(p.join("result.json")).unwrap();
    save_json(&p.join("result.json"), &r).unwrap();
    assert_eq!(first, std::fs::read(p.join("result.json")).unwrap());
}

#[test]
fn wrong_kind_version_or_body_is_a_schema_error() {
    let bytes = to_json_bytes(&gt()).unwrap();
    assert!(matches!(from_json_bytes::<ShapeSpace>(&bytes), Err(Error::Schema(_))));
    let text = String::from_utf8(bytes.clone()).unwrap();
    let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
    assert!(matches!(
        from_json_bytes::<GroundTruthScene>(bumped.as_bytes()),
        Err(Error::Version { found: 99, .. })
    ));
    assert!(matches!(
        from_json_bytes::<GroundTruthScene>(&bytes[..bytes.len() / 2]),
        Err(Error::Schema(_))
    ));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_json::<ShapeSpace>(&dir.path().join("absent.json")),
        Err(Error::MissingArtifact(_))
    ));
}

#[test]
fn stack_files_hold_a_header_and_four_bytes_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let stack = clean_stack(&gt());
    let path = dir.path().join("r.bin");
    save_stack(&path, &stack).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    assert_eq!(&bytes[..4], scenewire::evidence::STACK_MAGIC);
    assert_eq!(bytes.len(), 8 + header_len + 4 * stack.value_count());
    let dims: usize = stack
        .levels
        .iter()
        .map(|l| l.info.width * l.info.height * (stack.parts + 1))
        .sum();
    assert_eq!(stack.value_count(), dims);
    assert_eq!(load_stack(&path).unwrap(), stack);
    let mut corrupt = bytes.clone();
    corrupt[10] = b'#';
    assert!(matches!(
        scenewire::evidence::ResponseStack::from_bytes(&corrupt),
        Err(Error::Schema(_))
    ));
    let mut bad_magic = bytes;
    bad_magic[0] ^= 0xff;
    assert!(scenewire::evidence::ResponseStack::from_bytes(&bad_magic).is_err());
}

#[test]
fn generated_projects_are_byte_identical_and_reload() {
    let mut config = ModuleConfigs::default();
    config.shape.exemplars = 12;
    config.shape.rank = 3;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = generate_project(a.path(), 5, config.clone(), 1).unwrap();
    generate_project(b.path(), 5, config, 1).unwrap();
    let files = [
        "project.json",
        "shape_space.json",
        "masks.json",
        "scenes/scene_0000/scene.json",
        "scenes/scene_0000/detections.json",
        "scenes/scene_0000/responses.bin",
    ];
    for f in files {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let loaded = Project::load(a.path()).unwrap();
    assert_eq!(loaded.manifest, pa.manifest);
    assert_eq!(loaded.load_space().unwrap().rank(), 3);
    let dir = loaded.scene_dir("scene_0000");
    assert_eq!(dir.load_scene().unwrap().id, "scene_0000");
    std::fs::remove_file(dir.stack_path()).unwrap();
    assert!(matches!(Project::load(a.path()), Err(Error::MissingArtifact(_))));
}

#[test]
fn empty_results_render_only_the_frame() {
    let g = gt();
    let mut r = result(&g);
    r.scene.objects.clear();
    r.objects.clear();
    let svg = render_overlay(&r, &g.camera, space(), catalog()).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("<line"));
    let bird = render_birdseye(None, None, space(), &BirdseyeFrame::default()).unwrap();
    assert!(!bird.contains("<polygon"));
}

#[test]
fn birdseye_places_a_car_ten_metres_ahead() {
    let mut g = gt();
    g.objects.truncate(1);
    g.objects[0].pose = ObjectPose::new(0.0, 10.0, 0.0);
    let frame = BirdseyeFrame::default();
    let svg = render_birdseye(None, Some(&g), space(), &frame).unwrap();
    let c = frame.to_plot(0.0, 10.0);
    assert_eq!((c.x, c.y), (210.0, 390.0));
    assert!(svg.contains(r#"<circle class="truth-center" cx="210.00" cy="390.00""#));
    // A car facing away is longer along z than along x.
    let hull = footprint(space(), &g.objects[0].shape, &g.objects[0].pose).unwrap();
    let span = |f: fn(&scenewire::Point2) -> f64| {
        hull.iter().map(f).fold(f64::MIN, f64::max) - hull.iter().map(f).fold(f64::MAX, f64::min)
    };
    assert!(span(|p| p.y) > span(|p| p.x));
}

#[test]
fn truth_equal_to_estimate_draws_coincident_footprints() {
    let g = gt();
    let mut r = result(&g);
    r.scene.objects.truncate(1);
    r.scene.objects[0].pose = g.objects[0].pose;
    r.scene.objects[0].shape = g.objects[0].shape.clone();
    let mut one = g.clone();
    one.objects.truncate(1);
    let svg = render_birdseye(Some(&r), Some(&one), space(), &BirdseyeFrame::default()).unwrap();
    let points = |class: &str| {
        let tag = format!(r#"<polygon class="{class}" points=""#);
        let start = svg.find(&tag).unwrap() + tag.len();
        svg[start..start + svg[start..].find('"').unwrap()].to_string()
    };
    assert_eq!(points("truth"), points("estimate"));
    let overlay = render_overlay(&result(&g), &g.camera, space(), catalog()).unwrap();
    assert!(overlay.contains("class=\"wireframe\""));
}

#[test]
fn mask_sheet_has_one_group_per_mask() {
    let sheet = render_mask_sheet(catalog(), 17, 2.0);
    assert_eq!(sheet.matches("class=\"mask\"").count(), catalog().len());
    assert!(sheet.contains("id=\"mask-288\""));
}
