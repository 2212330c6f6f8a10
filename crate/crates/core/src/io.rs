//! Persistence: versioned JSON envelopes for structured artifacts, the
//! binary response-stack container, atomic whole-file writes and the
//! project manifest tying a benchmark directory together.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::evidence::{
    render_response_stack, synth_predetections, synth_scene, Detection, DetectionNoise, GroundTruthScene, NoiseParams,
    PyramidSpec, ResponseStack, SynthConfig,
};
use crate::inference::{scene_seed, InferenceConfig, InferenceResult, Variant};
use crate::likelihood::SceneHypothesis;
use crate::masks::{generate_mask_catalog, MaskCatalog, MaskParams};
use crate::shape::{fit_shape_space, generate_exemplars, ExemplarSet, ShapeSpace};

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming a project manifest used when `--config` is absent.
pub const CONFIG_ENV: &str = "SCENEWIRE_CONFIG";

/// A structured artifact stored as a JSON envelope `{format, version, data}`.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Artifact for ShapeSpace {
    const KIND: &'static str = "shape_space";
}
impl Artifact for MaskCatalog {
    const KIND: &'static str = "mask_catalog";
}
impl Artifact for GroundTruthScene {
    const KIND: &'static str = "scene";
}
impl Artifact for SceneHypothesis {
    const KIND: &'static str = "scene_hypothesis";
}
impl Artifact for InferenceResult {
    const KIND: &'static str = "inference_result";
}
impl Artifact for EvalReport {
    const KIND: &'static str = "eval_report";
}
impl Artifact for ExemplarSet {
    const KIND: &'static str = "exemplars";
}
impl Artifact for Vec<Detection> {
    const KIND: &'static str = "detections";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'a str,
    version: u32,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format: String,
    version: u32,
    data: serde_json::Value,
}

fn format_name(kind: &str) -> String {
    format!("scenewire.{kind}")
}

/// Pretty JSON envelope with a trailing newline. Floats round-trip exactly.
pub fn to_json_bytes<T: Artifact>(value: &T) -> Result<Vec<u8>> {
    let name = format_name(T::KIND);
    let mut out = serde_json::to_vec_pretty(&EnvelopeOut {
        format: &name,
        version: FORMAT_VERSION,
        data: value,
    })?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_json_bytes<T: Artifact>(bytes: &[u8]) -> Result<T> {
    let env: EnvelopeIn = serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
    let expected = format_name(T::KIND);
    if env.format != expected {
        return Err(Error::Schema(format!(
            "expected format '{expected}', found '{}'",
            env.format
        )));
    }
    if env.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: env.version,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(env.data).map_err(|e| Error::Schema(e.to_string()))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    // Temporary files are created owner-only; published artifacts are not.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })
}

pub fn save_json<T: Artifact>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn load_json<T: Artifact>(path: &Path) -> Result<T> {
    from_json_bytes(&read(path)?).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_stack(path: &Path, stack: &ResponseStack) -> Result<()> {
    write_atomic(path, &stack.to_bytes())
}

pub fn load_stack(path: &Path) -> Result<ResponseStack> {
    ResponseStack::from_bytes(&read(path)?)
}

/// Generator settings for the procedural training exemplars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeFitConfig {
    pub exemplars: usize,
    pub rank: usize,
}

impl Default for ShapeFitConfig {
    fn default() -> Self {
        Self { exemplars: 38, rank: 5 }
    }
}

/// Per-module settings carried by a project manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModuleConfigs {
    pub shape: ShapeFitConfig,
    pub masks: MaskParams,
    pub synth: SynthConfig,
    pub noise: NoiseParams,
    pub detection_noise: DetectionNoise,
    pub pyramid: PyramidSpec,
    pub inference: InferenceConfig,
}

impl ModuleConfigs {
    /// Settings of the occlusion-heavy ablation benchmark: noisy part maps
    /// with distractors on occluders, jittered pre-detections, and an
    /// inference budget sized for a single machine.
    pub fn benchmark() -> Self {
        let mut c = ModuleConfigs {
            noise: NoiseParams {
                floor_noise: 0.2,
                clutter_density: 1.0,
                occluder_clutter: 2.0,
                location_noise_px: 0.5,
                miss_prob: 0.05,
                peak_jitter: 0.2,
                ..NoiseParams::default()
            },
            detection_noise: DetectionNoise {
                center_jitter_px: 3.0,
                scale_jitter: 0.05,
                flip_prob: 0.0,
                score: [0.5, 1.0],
            },
            ..ModuleConfigs::default()
        };
        c.inference.n_particles = 45;
        c.inference.iterations = 20;
        c.inference.n_samples = 30;
        c
    }
}

/// Per-scene file names inside a scene directory.
pub const SCENE_FILE: &str = "scene.json";
pub const DETECTIONS_FILE: &str = "detections.json";
pub const RESPONSES_FILE: &str = "responses.bin";

/// One synthetic scene on disk: ground truth, pre-detections and the
/// response stack side by side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneDir {
    pub path: PathBuf,
}

impl SceneDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn scene_path(&self) -> PathBuf {
        self.path.join(SCENE_FILE)
    }

    pub fn detections_path(&self) -> PathBuf {
        self.path.join(DETECTIONS_FILE)
    }

    pub fn stack_path(&self) -> PathBuf {
        self.path.join(RESPONSES_FILE)
    }

    pub fn load_scene(&self) -> Result<GroundTruthScene> {
        load_json(&self.scene_path())
    }

    pub fn load_detections(&self) -> Result<Vec<Detection>> {
        load_json(&self.detections_path())
    }

    pub fn load_stack(&self) -> Result<ResponseStack> {
        load_stack(&self.stack_path())
    }

    pub fn save(&self, scene: &GroundTruthScene, detections: &Vec<Detection>, stack: &ResponseStack) -> Result<()> {
        save_json(&self.scene_path(), scene)?;
        save_json(&self.detections_path(), detections)?;
        save_stack(&self.stack_path(), stack)
    }

    fn required_files(&self) -> [PathBuf; 3] {
        [self.scene_path(), self.detections_path(), self.stack_path()]
    }
}

/// Index of a benchmark directory. Paths are relative to the manifest's
/// own directory; every scene lives in `scenes/<id>/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectManifest {
    pub format_version: u32,
    pub shape_space: PathBuf,
    pub mask_catalog: PathBuf,
    pub scenes: PathBuf,
    pub results: PathBuf,
    pub seed: u64,
    pub scene_ids: Vec<String>,
    pub config: ModuleConfigs,
}

impl ProjectManifest {
    /// Standard layout, no scenes yet.
    pub fn new(seed: u64, config: ModuleConfigs) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            shape_space: "shape_space.json".into(),
            mask_catalog: "masks.json".into(),
            scenes: "scenes".into(),
            results: "results".into(),
            seed,
            scene_ids: Vec::new(),
            config,
        }
    }
}

/// A loaded manifest plus the directory it lives in.
#[derive(Clone, Debug)]
pub struct Project {
    pub root: PathBuf,
    pub manifest: ProjectManifest,
}

pub const MANIFEST_FILE: &str = "project.json";

impl Project {
    pub fn new(root: impl Into<PathBuf>, manifest: ProjectManifest) -> Self {
        Self {
            root: root.into(),
            manifest,
        }
    }

    /// Loads a manifest from `path` (a file, or a directory holding
    /// `project.json`), checking the version and that every referenced
    /// artifact exists.
    pub fn load(path: &Path) -> Result<Project> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let manifest: ProjectManifest =
            serde_json::from_slice(&read(&file)?).map_err(|e| Error::Schema(format!("{}: {e}", file.display())))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let project = Project { root, manifest };
        project.check_files()?;
        Ok(project)
    }

    fn check_files(&self) -> Result<()> {
        let mut required = vec![self.shape_space_path(), self.mask_catalog_path()];
        for id in &self.manifest.scene_ids {
            required.extend(self.scene_dir(id).required_files());
        }
        match required.into_iter().find(|p| !p.is_file()) {
            Some(p) => Err(Error::MissingArtifact(p.display().to_string())),
            None => Ok(()),
        }
    }

    pub fn save(&self) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.root.join(MANIFEST_FILE), &bytes)
    }

    pub fn shape_space_path(&self) -> PathBuf {
        self.root.join(&self.manifest.shape_space)
    }

    pub fn mask_catalog_path(&self) -> PathBuf {
        self.root.join(&self.manifest.mask_catalog)
    }

    pub fn scenes_dir(&self) -> PathBuf {
        self.root.join(&self.manifest.scenes)
    }

    pub fn scene_dir(&self, id: &str) -> SceneDir {
        SceneDir::new(self.scenes_dir().join(id))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.root.join(&self.manifest.results)
    }

    pub fn result_path(&self, variant: &Variant, id: &str) -> PathBuf {
        self.results_dir().join(variant.to_string()).join(format!("{id}.json"))
    }

    pub fn load_space(&self) -> Result<ShapeSpace> {
        load_json(&self.shape_space_path())
    }

    pub fn load_catalog(&self) -> Result<MaskCatalog> {
        let c: MaskCatalog = load_json(&self.mask_catalog_path())?;
        c.validate()?;
        Ok(c)
    }
}

/// Scene id of the `index`-th generated scene.
pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Generates a complete project under `root`: a shape space fitted to
/// procedural exemplars, the mask catalog, and `n_scenes` synthetic scenes
/// with their pre-detections and response stacks. Every random draw derives
/// from `seed`, so the same call always writes the same bytes.
pub fn generate_project(root: &Path, seed: u64, config: ModuleConfigs, n_scenes: usize) -> Result<Project> {
    let exemplars = generate_exemplars(config.shape.exemplars, scene_seed(seed, "exemplars"));
    let space = fit_shape_space(&exemplars.exemplars, config.shape.rank)?.with_part_names(exemplars.part_names)?;
    let catalog = generate_mask_catalog(&config.masks)?;
    let mut manifest = ProjectManifest::new(seed, config);
    manifest.scene_ids = (0..n_scenes).map(scene_id).collect();
    let project = Project::new(root, manifest);
    save_json(&project.shape_space_path(), &space)?;
    save_json(&project.mask_catalog_path(), &catalog)?;
    let cfg = &project.manifest.config;
    project.manifest.scene_ids.par_iter().try_for_each(|id| -> Result<()> {
        let (scene, dets, stack) = synth_scene_inputs(cfg, &space, seed, id)?;
        project.scene_dir(id).save(&scene, &dets, &stack)
    })?;
    project.save()?;
    Ok(project)
}

/// Ground truth, pre-detections and response stack of one synthetic scene,
/// each drawn from its own stream derived from `seed` and the scene id.
pub fn synth_scene_inputs(
    config: &ModuleConfigs,
    space: &ShapeSpace,
    seed: u64,
    id: &str,
) -> Result<(GroundTruthScene, Vec<Detection>, ResponseStack)> {
    let scene = synth_scene(&config.synth, space, scene_seed(seed, &format!("{id}/scene")), id)?;
    let stack = render_response_stack(
        &scene,
        space.vertex_count(),
        &config.noise,
        &config.pyramid,
        scene_seed(seed, &format!("{id}/responses")),
    )?;
    let dets = synth_predetections(
        &scene,
        &config.detection_noise,
        scene_seed(seed, &format!("{id}/detections")),
    )?;
    Ok((scene, dets, stack))
}

/// Manifest path from the environment, if set.
pub fn config_from_env() -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// All `*.json` files directly inside `dir`, sorted by file name.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(dir.display().to_string()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{generate_mask_catalog, MaskParams};

    #[test]
    fn envelope_round_trip_and_checks() {
        let catalog = generate_mask_catalog(&MaskParams::default()).unwrap();
        let bytes = to_json_bytes(&catalog).unwrap();
        let back: MaskCatalog = from_json_bytes(&bytes).unwrap();
        assert_eq!(back, catalog);

        let text = String::from_utf8(bytes).unwrap();
        let bumped = text.replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            from_json_bytes::<MaskCatalog>(bumped.as_bytes()),
            Err(Error::Version { found: 7, .. })
        ));
        assert!(matches!(
            from_json_bytes::<ShapeSpace>(text.as_bytes()),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            from_json_bytes::<MaskCatalog>(&text.as_bytes()[..40]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.bin");
        write_atomic(&p, b"first version").unwrap();
        write_atomic(&p, b"2").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"2");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let project = Project::new(dir.path(), ProjectManifest::new(3, ModuleConfigs::default()));
        project.save().unwrap();
        assert!(matches!(Project::load(dir.path()), Err(Error::MissingArtifact(_))));
        fs::write(project.shape_space_path(), b"{}").unwrap();
        fs::write(project.mask_catalog_path(), b"{}").unwrap();
        let loaded = Project::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded.manifest, project.manifest);
    }
}
