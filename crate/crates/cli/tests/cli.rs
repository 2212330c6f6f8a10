use std::path::Path;
use std::process::{Command, Output};

use scenewire::io::ModuleConfigs;
use tempfile::TempDir;

fn scenewire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenewire"))
        .args(args)
        .env_remove("SCENEWIRE_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = scenewire(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    scenewire(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A two-scene project with a small inference budget.
fn project(dir: &TempDir) -> std::path::PathBuf {
    let mut cfg = ModuleConfigs::default();
    cfg.shape.exemplars = 12;
    cfg.shape.rank = 3;
    cfg.inference.n_particles = 3;
    cfg.inference.iterations = 2;
    cfg.inference.n_samples = 5;
    let cfg_path = dir.path().join("modules.json");
    std::fs::write(&cfg_path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    let root = dir.path().join("proj");
    ok(&[
        "--config",
        s(&cfg_path),
        "--seed",
        "5",
        "synth",
        "--out-dir",
        s(&root),
        "--scenes",
        "2",
    ]);
    root
}

#[test]
fn infer_and_eval_are_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let root = project(&dir);
    let run = |name: &str, threads: &str| {
        let results = dir.path().join(name);
        let report = dir.path().join(format!("{name}.json"));
        ok(&[
            "--config",
            s(&root),
            "--threads",
            threads,
            "infer",
            "--all",
            "--variant",
            "table",
            "--out-dir",
            s(&results),
        ]);
        ok(&[
            "--threads",
            threads,
            "eval",
            "--results-dir",
            s(&results),
            "--gt-dir",
            s(&root.join("scenes")),
            "--out",
            s(&report),
        ]);
        let mut bytes = Vec::new();
        for v in ["fg", "fg+gp+do+so", "coarse+gp"] {
            for id in ["scene_0000", "scene_0001"] {
                bytes.extend(std::fs::read(results.join(v).join(format!("{id}.json"))).unwrap());
            }
        }
        (bytes, std::fs::read(report).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "8");
    assert!(!a.0.is_empty());
    assert!(a == b, "results differ between identical runs");
    assert!(a == c, "results differ between 1 and 8 threads");
}

#[test]
fn single_scene_inference_matches_the_project_run() {
    let dir = TempDir::new().unwrap();
    let root = project(&dir);
    let single = dir.path().join("one.json");
    let scene = root.join("scenes").join("scene_0001");
    ok(&["infer", "--scene-dir", s(&scene), "--out", s(&single)]);
    let all = dir.path().join("all");
    ok(&["--config", s(&root), "infer", "--all", "--out-dir", s(&all)]);
    let from_all = std::fs::read(all.join("fg+gp+do+so").join("scene_0001.json")).unwrap();
    assert_eq!(std::fs::read(&single).unwrap(), from_all);

    let out = dir.path().join("render");
    ok(&[
        "render",
        "--scene-dir",
        s(&scene),
        "--result",
        s(&single),
        "--out-dir",
        s(&out),
    ]);
    assert!(out.join("overlay.svg").is_file() && out.join("birdseye.svg").is_file());
    let explained = ok(&[
        "explain",
        "--scene-dir",
        s(&scene),
        "--result",
        s(&single),
        "--object",
        "0",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&explained.stdout).unwrap();
    assert_eq!(doc["objects"].as_array().unwrap().len(), 1);
}

#[test]
fn shape_and_mask_commands_write_artifacts() {
    let dir = TempDir::new().unwrap();
    let masks = dir.path().join("masks.json");
    let out = ok(&[
        "gen-masks",
        "--out",
        s(&masks),
        "--svg",
        s(&dir.path().join("masks.svg")),
    ]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "289 masks");
    let space = dir.path().join("space.json");
    let ex = dir.path().join("ex.json");
    ok(&[
        "fit-shape",
        "--generate",
        "10",
        "--save-exemplars",
        s(&ex),
        "--rank",
        "4",
        "--out",
        s(&space),
    ]);
    let again = dir.path().join("space2.json");
    ok(&["fit-shape", "--exemplars", s(&ex), "--rank", "4", "--out", s(&again)]);
    assert_eq!(std::fs::read(&space).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn exit_codes_separate_usage_data_and_inference_failures() {
    let dir = TempDir::new().unwrap();
    // Usage.
    assert_eq!(code(&["infer", "--all"]), 1);
    assert_eq!(code(&["--threads", "0", "gen-masks", "--out", "x.json"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    // Missing or corrupt data.
    let missing = dir.path().join("missing");
    assert_eq!(
        code(&[
            "eval",
            "--results-dir",
            s(&missing),
            "--gt-dir",
            s(&missing),
            "--out",
            "r.json"
        ]),
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, b"{ not json").unwrap();
    assert_eq!(code(&["--config", s(&bad), "gen-masks", "--out", "x.json"]), 2);
    // Inference: every detection falls below the threshold.
    let root = project(&dir);
    let mut strict: ModuleConfigs =
        serde_json::from_slice(&std::fs::read(dir.path().join("modules.json")).unwrap()).unwrap();
    strict.inference.detection_threshold = 2.0;
    let strict_path = dir.path().join("strict.json");
    std::fs::write(&strict_path, serde_json::to_vec(&strict).unwrap()).unwrap();
    let scene = root.join("scenes").join("scene_0000");
    let out = dir.path().join("r.json");
    assert_eq!(
        code(&[
            "--config",
            s(&strict_path),
            "infer",
            "--scene-dir",
            s(&scene),
            "--out",
            s(&out)
        ]),
        3
    );
}
