use std::path::{Path, PathBuf};

use clap::ValueEnum;
use scenewire::io::{config_from_env, ModuleConfigs, Project, MANIFEST_FILE};
use scenewire::Error;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    Benchmark,
}

impl Preset {
    pub fn configs(self) -> ModuleConfigs {
        match self {
            Preset::Default => ModuleConfigs::default(),
            Preset::Benchmark => ModuleConfigs::benchmark(),
        }
    }
}

/// Settings shared by every subcommand: the configuration named by
/// `--config` (or the environment) and the master seed.
pub struct Context {
    /// Module settings from an explicit configuration, if any.
    pub modules: Option<ModuleConfigs>,
    /// The project, when the configuration is a manifest.
    pub project: Option<Project>,
    pub seed: Option<u64>,
}

impl Context {
    pub fn resolve(config: Option<PathBuf>, seed: Option<u64>) -> Result<Context, CliError> {
        let Some(mut path) = config.or_else(config_from_env) else {
            return Ok(Context {
                modules: None,
                project: None,
                seed,
            });
        };
        if path.is_dir() {
            path = path.join(MANIFEST_FILE);
        }
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        if value.get("scene_ids").is_some() && value.get("format_version").is_some() {
            let project = Project::load(&path)?;
            return Ok(Context {
                modules: Some(project.manifest.config.clone()),
                project: Some(project),
                seed,
            });
        }
        let modules: ModuleConfigs =
            serde_json::from_value(value).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Ok(Context {
            modules: Some(modules),
            project: None,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
            .or(self.project.as_ref().map(|p| p.manifest.seed))
            .unwrap_or(0)
    }

    pub fn modules_or(&self, preset: Preset) -> ModuleConfigs {
        self.modules.clone().unwrap_or_else(|| preset.configs())
    }

    /// The configured project, or the nearest `project.json` above `dir`.
    pub fn project_near(&self, dir: &Path) -> Result<Project, CliError> {
        if let Some(p) = &self.project {
            return Ok(p.clone());
        }
        let start = dir
            .canonicalize()
            .map_err(|_| Error::MissingArtifact(dir.display().to_string()))?;
        for d in start.ancestors() {
            if d.join(MANIFEST_FILE).is_file() {
                return Ok(Project::load(d)?);
            }
        }
        Err(CliError::Usage(format!(
            "no project manifest found above {}; pass --config",
            dir.display()
        )))
    }

    pub fn project(&self) -> Result<&Project, CliError> {
        self.project
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs a project manifest; pass --config".into()))
    }
}
