use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::LikelihoodConfig;

/// Model variant: which scene-level components are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variant {
    pub ground_plane: bool,
    pub deterministic_occlusion: bool,
    pub searched_occluder: bool,
    /// Coarse baseline: mean shape, no refinement.
    pub coarse: bool,
}

impl Variant {
    pub const FG: Variant = Variant::fine(false, false, false);
    pub const FG_SO: Variant = Variant::fine(false, false, true);
    pub const FG_DO: Variant = Variant::fine(false, true, false);
    pub const FG_GP: Variant = Variant::fine(true, false, false);
    pub const FULL: Variant = Variant::fine(true, true, true);
    pub const COARSE: Variant = Variant {
        ground_plane: false,
        deterministic_occlusion: false,
        searched_occluder: false,
        coarse: true,
    };
    pub const COARSE_GP: Variant = Variant {
        ground_plane: true,
        ..Variant::COARSE
    };

    const fn fine(gp: bool, det: bool, so: bool) -> Variant {
        Variant {
            ground_plane: gp,
            deterministic_occlusion: det,
            searched_occluder: so,
            coarse: false,
        }
    }

    /// The variants of the ablation table, in table order.
    pub fn table() -> Vec<Variant> {
        vec![
            Variant::FG,
            Variant::FG_SO,
            Variant::FG_DO,
            Variant::FG_GP,
            Variant::FULL,
            Variant::COARSE,
            Variant::COARSE_GP,
        ]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.coarse { "coarse" } else { "fg" })?;
        if self.ground_plane {
            f.write_str("+gp")?;
        }
        if self.deterministic_occlusion {
            f.write_str("+do")?;
        }
        if self.searched_occluder {
            f.write_str("+so")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split('+').map(|t| t.trim().to_ascii_lowercase());
        let mut v = match tokens.next().as_deref() {
            Some("fg") => Variant::FG,
            Some("coarse") => Variant::COARSE,
            _ => return Err(Error::Params(format!("unknown variant '{s}'"))),
        };
        for t in tokens {
            let flag = match t.as_str() {
                "gp" => &mut v.ground_plane,
                "do" if !v.coarse => &mut v.deterministic_occlusion,
                "so" if !v.coarse => &mut v.searched_occluder,
                _ => {
                    return Err(Error::Params(format!(
                        "unknown or unsupported component '{t}' in '{s}'"
                    )))
                }
            };
            if *flag {
                return Err(Error::Params(format!("component '{t}' repeated in '{s}'")));
            }
            *flag = true;
        }
        Ok(v)
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

/// Initial sampling standard deviations per object parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSigma {
    pub x: f64,
    pub z: f64,
    pub azimuth_deg: f64,
    /// In units of each shape mode's standard deviation.
    pub shape: f64,
    /// Support-plane parameters, only sampled without a shared ground plane.
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub height: f64,
}

impl Default for InitSigma {
    fn default() -> Self {
        Self {
            x: 0.5,
            z: 1.0,
            azimuth_deg: 10.0,
            shape: 0.5,
            pitch_deg: 1.0,
            roll_deg: 1.0,
            height: 0.1,
        }
    }
}

/// Grid searched when lifting detections to 3D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseGrid {
    pub pitch_deg: f64,
    pub pitch_step_deg: f64,
    pub roll_deg: f64,
    pub roll_step_deg: f64,
    pub depth_radius: f64,
    pub depth_step: f64,
    pub azimuth_radius_deg: f64,
    pub azimuth_step_deg: f64,
    /// Consistency gate on projected box overlap with the detection.
    pub min_iou: f64,
    /// Candidates kept per detection and plane.
    pub per_detection: usize,
    /// Depth at which the reference box height is measured.
    pub reference_depth: f64,
}

impl Default for CoarseGrid {
    fn default() -> Self {
        Self {
            pitch_deg: 1.0,
            pitch_step_deg: 0.25,
            roll_deg: 0.5,
            roll_step_deg: 0.25,
            depth_radius: 2.0,
            depth_step: 0.25,
            azimuth_radius_deg: 22.5,
            azimuth_step_deg: 5.0,
            min_iou: 0.5,
            per_detection: 4,
            reference_depth: 10.0,
        }
    }
}

/// Symmetric grid `-radius, -radius + step, ..., radius`.
pub fn symmetric_grid(radius: f64, step: f64) -> Vec<f64> {
    if radius <= 0.0 || step <= 0.0 {
        return vec![0.0];
    }
    let n = (2.0 * radius / step + 1e-9).floor() as usize;
    (0..=n).map(|k| -radius + k as f64 * step).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub variant: Variant,
    pub n_particles: usize,
    pub iterations: usize,
    pub n_samples: usize,
    /// Softmax temperature of the covariance update, in likelihood units.
    pub temperature: f64,
    pub init_sigma: InitSigma,
    /// Sampling deviations are clamped to `[min_factor, max_factor]` times the initial ones.
    pub sigma_min_factor: f64,
    pub sigma_max_factor: f64,
    /// Bound on shape coefficients, in mode deviations.
    pub shape_limit: f64,
    pub coarse: CoarseGrid,
    /// Detections below this score are ignored.
    pub detection_threshold: f64,
    pub likelihood: LikelihoodConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FULL,
            n_particles: 250,
            iterations: 30,
            n_samples: 40,
            temperature: 0.5,
            init_sigma: InitSigma::default(),
            sigma_min_factor: 1e-3,
            sigma_max_factor: 4.0,
            shape_limit: 3.0,
            coarse: CoarseGrid::default(),
            detection_threshold: 0.0,
            likelihood: LikelihoodConfig::default(),
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Params("n_particles must be at least 1".into()));
        }
        if self.iterations > 0 && self.n_samples == 0 {
            return Err(Error::Params("n_samples must be at least 1".into()));
        }
        if !(self.temperature > 0.0) || !(self.sigma_min_factor > 0.0) || self.sigma_max_factor < self.sigma_min_factor
        {
            return Err(Error::Params(
                "temperature and sigma clamps must be positive and ordered".into(),
            ));
        }
        let s = &self.init_sigma;
        let sigmas = [s.x, s.z, s.azimuth_deg, s.shape, s.pitch_deg, s.roll_deg, s.height];
        if sigmas.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Params("initial sigmas must be nonnegative".into()));
        }
        Ok(())
    }

    /// Settings actually used: coarse variants run one particle and no refinement.
    pub fn effective(&self) -> InferenceConfig {
        let mut c = self.clone();
        if c.variant.coarse {
            c.n_particles = 1;
            c.iterations = 0;
        }
        c
    }
}
