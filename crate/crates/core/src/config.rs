//! The pipeline configuration document.
//!
//! Every field has a default, unknown keys are rejected, and the resolved
//! document is written next to the outputs of each run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bracket::{ExpandLimits, DEFAULT_TIMEOUT, TIMEOUT_ENV};
use crate::error::{Error, Result};
use crate::gs::fit::FitConfig;
use crate::gs::emitters::{DEFAULT_DIRECTIONS, DEFAULT_THRESHOLD};
use crate::merge::{AuditConfig, WeightProfile};
use crate::metrics::CompareOptions;
use crate::relight::SceneSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub inputs: Inputs,
    pub output_dir: PathBuf,
    /// Threads for per-image stages; 0 uses all cores.
    pub workers: usize,
    pub predictor: PredictorConfig,
    pub expand: ExpandLimits,
    pub merge: WeightProfile,
    pub panorama: PanoramaMode,
    /// Cube face size for panoramas; 0 means half the panorama height.
    pub face_size: usize,
    pub audit: AuditConfig,
    pub gs: GsConfig,
    pub emitters: Option<EmitterConfig>,
    pub bake: Option<BakeConfig>,
    pub relight: Option<RelightConfig>,
    /// Direct HDR-vs-ground-truth metrics per image.
    pub metrics: Option<CompareOptions>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            inputs: Inputs::default(),
            output_dir: PathBuf::from("out"),
            workers: 0,
            predictor: PredictorConfig::default(),
            expand: ExpandLimits::default(),
            merge: WeightProfile::default(),
            panorama: PanoramaMode::default(),
            face_size: 0,
            audit: AuditConfig::default(),
            gs: GsConfig::default(),
            emitters: None,
            bake: None,
            relight: None,
            metrics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Directory of LDR PNG images, processed in file-name order.
    pub images: PathBuf,
    /// NeRF-style `transforms.json`. Without it the splat stages are skipped.
    pub poses: Option<PathBuf>,
    /// Directory of linear ground truth named like the images (`.hdr`/`.pfm`).
    /// Needed by the oracle predictor and by the metric stages.
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PredictorConfig {
    Oracle,
    External {
        command: Vec<String>,
        /// Seconds per request. Filled from the environment when resolving.
        #[serde(default)]
        timeout_secs: Option<f64>,
    },
    Echo,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::Oracle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanoramaMode {
    /// 2:1 images are split into cube faces.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GsConfig {
    pub init: InitConfig,
    pub fit: FitConfig,
}

impl Default for GsConfig {
    fn default() -> Self {
        Self {
            init: InitConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub sh_degree: usize,
    /// A PLY whose gaussian means seed the fit. Otherwise `random_points` are
    /// drawn uniformly inside `bounds` with the fit seed.
    pub points: Option<PathBuf>,
    pub random_points: usize,
    pub bounds: [[f64; 3]; 2],
    pub opacity: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            sh_degree: 3,
            points: None,
            random_points: 2000,
            bounds: [[-1.0; 3], [1.0; 3]],
            opacity: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterConfig {
    pub threshold: f64,
    pub directions: usize,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            directions: DEFAULT_DIRECTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BakeConfig {
    pub at: [f64; 3],
    pub width: usize,
}

impl Default for BakeConfig {
    fn default() -> Self {
        Self {
            at: [0.0; 3],
            width: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelightConfig {
    pub scene: SceneSpec,
    /// Vertical field of view of the partial environment, degrees.
    pub fov_deg: f64,
    pub compare: CompareOptions,
}

impl Default for RelightConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            fov_deg: 90.0,
            compare: CompareOptions::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.inputs.images);
        if let Some(p) = &mut self.inputs.poses {
            fix(p);
        }
        if let Some(p) = &mut self.inputs.ground_truth {
            fix(p);
        }
        if let Some(p) = &mut self.gs.init.points {
            fix(p);
        }
    }

    /// Fills values taken from the environment so the written config fully
    /// determines the run, then validates.
    pub fn resolve(mut self) -> Result<Self> {
        if let PredictorConfig::External { timeout_secs, .. } = &mut self.predictor {
            if timeout_secs.is_none() {
                let env = std::env::var(TIMEOUT_ENV).ok().and_then(|v| v.parse::<f64>().ok());
                *timeout_secs = Some(env.filter(|s| *s > 0.0).unwrap_or(DEFAULT_TIMEOUT.as_secs_f64()));
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.inputs.images.as_os_str().is_empty() {
            return Err(Error::invalid("inputs.images is required"));
        }
        if self.expand.step_ev <= 0.0 {
            return Err(Error::invalid("expand.step_ev must be positive"));
        }
        self.merge.validate()?;
        match &self.predictor {
            PredictorConfig::Oracle if self.inputs.ground_truth.is_none() => {
                return Err(Error::invalid("the oracle predictor needs inputs.ground_truth"));
            }
            PredictorConfig::External { command, timeout_secs } => {
                if command.is_empty() {
                    return Err(Error::invalid("predictor.command is empty"));
                }
                if timeout_secs.is_some_and(|t| !(t > 0.0)) {
                    return Err(Error::invalid("predictor.timeout_secs must be positive"));
                }
            }
            _ => {}
        }
        if (self.relight.is_some() || self.metrics.is_some()) && self.inputs.ground_truth.is_none() {
            return Err(Error::invalid("relight and metrics stages need inputs.ground_truth"));
        }
        if self.gs.init.sh_degree > crate::gs::sh::MAX_DEGREE {
            return Err(Error::invalid("gs.init.sh_degree exceeds 3"));
        }
        if let Some(b) = &self.bake {
            if b.width < 2 || b.width % 2 != 0 {
                return Err(Error::invalid("bake.width must be even and at least 2"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig {
            inputs: Inputs { images: "imgs".into(), ground_truth: Some("gt".into()), poses: None },
            bake: Some(BakeConfig::default()),
            ..Default::default()
        };
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = serde_json::from_str::<PipelineConfig>(r#"{"version":1,"inputz":{}}"#).unwrap_err();
        assert!(e.to_string().contains("inputz"), "{e}");
        let e = serde_json::from_str::<PipelineConfig>(r#"{"gs":{"fit":{"iters":3}}}"#).unwrap_err();
        assert!(e.to_string().contains("iters"), "{e}");
    }

    #[test]
    fn version_is_checked() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"version":2,"inputs":{"images":"a","ground_truth":"b"}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oracle_needs_ground_truth() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"inputs":{"images":"a"}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: PipelineConfig = serde_json::from_str(r#"{"inputs":{"images":"a"},"predictor":{"kind":"echo"}}"#).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn resolve_pins_the_timeout() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"inputs":{"images":"a"},"predictor":{"kind":"external","command":["p"]}}"#).unwrap();
        match cfg.resolve().unwrap().predictor {
            PredictorConfig::External { timeout_secs, .. } => assert!(timeout_secs.unwrap() > 0.0),
            _ => unreachable!(),
        }
    }
}
