//! End-to-end run: expand and merge every LDR input, fit a splat scene to the
//! merged views, then the optional emitter, bake, relight and metric stages.
//!
//! Expensive stages are cached under `<output_dir>/stages/<stage>/<key>/`
//! where the key hashes the stage's inputs and settings. A directory is only
//! renamed into place once its stage finished, so reruns resume and a failed
//! stage leaves its partial work in `<key>.partial`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bracket::{expand_stack, EchoPredictor, ExposurePredictor, ExternalPredictor, OraclePredictor};
use crate::color::{DisplayImage, LinearImage, Transfer};
use crate::config::{PanoramaMode, PipelineConfig, PredictorConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::gs::camera::{read_transforms, CameraView};
use crate::gs::fit::{fit, init_from_points, random_points};
use crate::gs::ply::{read_ply, write_ply};
use crate::gs::{bake_envmap, classify_emitters, EmitterSet};
use crate::io;
use crate::merge::{audit_hdr, merge, AuditVerdict};
use crate::metrics::{compare, RelightReport};
use crate::pano::{cubemap_to_equirect, equirect_to_cubemap, CubeMap};
use crate::relight::{evaluate_pair, PartialIbl};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    /// SHA-256 of the resolved config JSON.
    pub config_sha256: String,
    pub images: Vec<ImageReport>,
    pub gs: Option<GsReport>,
    pub emitters: Option<EmitterSet>,
    pub bake: Option<BakeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub name: String,
    pub expansion: ExpansionSummary,
    pub audit: AuditVerdict,
    pub metrics: Option<RelightReport>,
    pub relight: Option<RelightReport>,
}

/// Totals over the cube faces for panoramas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub cube_faces: bool,
    pub darker_steps: usize,
    pub brighter_steps: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsReport {
    pub views: usize,
    pub gaussians: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub final_l1: f64,
    pub final_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BakeReport {
    pub at: [f64; 3],
    pub width: usize,
    pub max_radiance: f32,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    pub output_dir: PathBuf,
    /// Stage directories reused from an earlier run.
    pub reused: Vec<String>,
}

struct Cache {
    root: PathBuf,
    reused: std::sync::Mutex<Vec<String>>,
}

impl Cache {
    /// Runs `f` in a fresh directory unless a finished one exists for `key`.
    fn stage<T: Serialize + DeserializeOwned>(
        &self,
        stage: &str,
        key: &str,
        f: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<(T, PathBuf)> {
        let dir = self.root.join(stage).join(key);
        let marker = dir.join("stage.json");
        if let Ok(bytes) = std::fs::read(&marker) {
            if let Ok(v) = serde_json::from_slice(&bytes) {
                log::info!("{stage}: reusing {}", dir.display());
                self.reused.lock().unwrap().push(format!("{stage}/{key}"));
                return Ok((v, dir));
            }
        }
        let tmp = self.root.join(stage).join(format!("{key}.partial"));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| Error::io_at(&tmp, e))?;
        }
        std::fs::create_dir_all(&tmp).map_err(|e| Error::io_at(&tmp, e))?;
        let v = f(&tmp)?;
        let m = tmp.join("stage.json");
        std::fs::write(&m, serde_json::to_vec_pretty(&v)?).map_err(|e| Error::io_at(&m, e))?;
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io_at(&dir, e))?;
        }
        std::fs::rename(&tmp, &dir).map_err(|e| Error::io_at(&dir, e))?;
        Ok((v, dir))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io_at(path, e))?))
}

fn key_of(v: &serde_json::Value) -> String {
    sha256_hex(v.to_string().as_bytes())[..24].to_string()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io_at(path, e))
}

/// LDR inputs (`.png`) in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io_at(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io_at(dir, e))?.path();
        let png = p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if p.is_file() && png {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string()
}

fn find_ground_truth(dir: &Path, name: &str) -> Option<PathBuf> {
    ["hdr", "pfm"].iter().map(|e| dir.join(format!("{name}.{e}"))).find(|p| p.is_file())
}

fn predictor_for(cfg: &PredictorConfig, gt: Option<&LinearImage>) -> Result<Box<dyn ExposurePredictor>> {
    Ok(match cfg {
        PredictorConfig::Oracle => {
            let gt = gt.ok_or_else(|| Error::invalid("oracle predictor without ground truth"))?;
            Box::new(OraclePredictor::new(gt.clone()))
        }
        PredictorConfig::External { command, timeout_secs } => {
            let mut p = ExternalPredictor::new(command.clone())?;
            if let Some(t) = timeout_secs {
                p = p.with_timeout(Duration::from_secs_f64(*t));
            }
            Box::new(p)
        }
        PredictorConfig::Echo => Box::new(EchoPredictor),
    })
}

fn expand_merge_plane(
    i0: &DisplayImage,
    gt: Option<&LinearImage>,
    cfg: &PipelineConfig,
) -> Result<(LinearImage, ExpansionSummary)> {
    let mut predictor = predictor_for(&cfg.predictor, gt)?;
    let ex = expand_stack(i0, &mut predictor, &cfg.expand).map_err(|e| Error::Predictor(e.source))?;
    let merged = merge(&ex.stack, &cfg.merge)?;
    let summary = ExpansionSummary {
        cube_faces: false,
        darker_steps: ex.darker_steps,
        brighter_steps: ex.brighter_steps,
        truncated: ex.truncated(),
    };
    Ok((merged, summary))
}

/// Expands and merges one image, face by face for panoramas.
pub fn expand_merge(
    i0: &DisplayImage,
    gt: Option<&LinearImage>,
    cfg: &PipelineConfig,
) -> Result<(LinearImage, ExpansionSummary)> {
    let (w, h) = i0.dims();
    let faces = match cfg.panorama {
        PanoramaMode::Always => true,
        PanoramaMode::Never => false,
        PanoramaMode::Auto => w == 2 * h,
    };
    if !faces {
        return expand_merge_plane(i0, gt, cfg);
    }
    let n = if cfg.face_size > 0 { cfg.face_size } else { (h / 2).max(1) };
    let ldr = equirect_to_cubemap(i0, n)?;
    let gt_faces = gt.map(|g| equirect_to_cubemap(g, n)).transpose()?;
    let mut merged = Vec::with_capacity(6);
    let mut total = ExpansionSummary {
        cube_faces: true,
        darker_steps: 0,
        brighter_steps: 0,
        truncated: false,
    };
    for (i, face) in ldr.faces().iter().enumerate() {
        let g = gt_faces.as_ref().map(|c| &c.faces()[i]);
        let (m, s) = expand_merge_plane(face, g, cfg)?;
        total.darker_steps += s.darker_steps;
        total.brighter_steps += s.brighter_steps;
        total.truncated |= s.truncated;
        merged.push(m);
    }
    Ok((cubemap_to_equirect(&CubeMap::new(merged)?, w)?, total))
}

struct Merged {
    name: String,
    key: String,
    hdr: LinearImage,
    gt: Option<(LinearImage, String)>,
    expansion: ExpansionSummary,
}

/// Runs every configured stage and writes the artifacts and `report.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let cfg = cfg.clone().resolve().map_err(|e| e.in_stage("config"))?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io_at(&out, e).in_stage("config"))?;
    let resolved = serde_json::to_string_pretty(&cfg)?;
    let config_sha256 = sha256_hex(resolved.as_bytes());
    std::fs::write(out.join("config.resolved.json"), format!("{resolved}\n"))
        .map_err(|e| Error::io_at(out.join("config.resolved.json"), e).in_stage("config"))?;
    let cache = Cache {
        root: out.join("stages"),
        reused: Default::default(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()).in_stage("config"))?;

    // expand + merge, one bounded pool task per image
    let images = list_images(&cfg.inputs.images).map_err(|e| e.in_stage("expand-merge"))?;
    if images.is_empty() {
        log::warn!("no PNG inputs in {}", cfg.inputs.images.display());
    }
    let hdr_dir = out.join("hdr");
    std::fs::create_dir_all(&hdr_dir).map_err(|e| Error::io_at(&hdr_dir, e).in_stage("expand-merge"))?;
    let merged: Vec<Merged> = pool.install(|| {
        images
            .par_iter()
            .map(|path| {
                let name = stem(path);
                merge_stage(&cfg, &cache, path, &name).map_err(|e| e.in_stage(format!("expand-merge ({name})")))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut reports = Vec::with_capacity(merged.len());
    for m in &merged {
        io::write_linear(&m.hdr, hdr_dir.join(format!("{}.hdr", m.name))).map_err(|e| e.in_stage("expand-merge"))?;
        let audit = audit_hdr(&m.hdr, &cfg.audit);
        let metrics = match (&cfg.metrics, &m.gt) {
            (Some(opts), Some((gt, _))) => Some(
                compare(&m.hdr, gt, opts).map_err(|e| e.in_stage(format!("metrics ({})", m.name)))?,
            ),
            _ => None,
        };
        reports.push(ImageReport {
            name: m.name.clone(),
            expansion: m.expansion.clone(),
            audit,
            metrics,
            relight: None,
        });
    }

    if cfg.relight.is_some() {
        let dir = out.join("relight");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io_at(&dir, e).in_stage("relight"))?;
        let results: Vec<Option<RelightReport>> = pool.install(|| {
            merged
                .par_iter()
                .map(|m| relight_stage(&cfg, &cache, m, &dir).map_err(|e| e.in_stage(format!("relight ({})", m.name))))
                .collect::<Result<Vec<_>>>()
        })?;
        for (r, rel) in reports.iter_mut().zip(results) {
            r.relight = rel;
        }
    }

    let mut report = PipelineReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_sha256,
        images: reports,
        gs: None,
        emitters: None,
        bake: None,
    };

    if let Some(poses) = &cfg.inputs.poses {
        let (gs, scene_path) = fit_stage(&cfg, &cache, poses, &merged).map_err(|e| e.in_stage("fit-gs"))?;
        report.gs = Some(gs);
        let scene_out = out.join("scene.ply");
        std::fs::copy(&scene_path, &scene_out).map_err(|e| Error::io_at(&scene_out, e).in_stage("fit-gs"))?;
        let scene = read_ply(&scene_path).map_err(|e| e.in_stage("fit-gs"))?;
        if let Some(ec) = &cfg.emitters {
            let set = classify_emitters(&scene, ec.threshold, ec.directions);
            write_json(&set, &out.join("emitters.json")).map_err(|e| e.in_stage("emitters"))?;
            report.emitters = Some(set);
        }
        if let Some(bc) = &cfg.bake {
            let key = key_of(&serde_json::json!({
                "stage": "bake",
                "scene": file_sha(&scene_path).map_err(|e| e.in_stage("bake"))?,
                "config": bc,
            }));
            let (b, dir) = cache
                .stage("bake", &key, |tmp| {
                    let env = bake_envmap(&scene, Vec3::from_array(bc.at), bc.width)?;
                    io::write_linear(&env, tmp.join("env.pfm"))?;
                    Ok(BakeReport {
                        at: bc.at,
                        width: bc.width,
                        max_radiance: env.max_value(),
                    })
                })
                .map_err(|e| e.in_stage("bake"))?;
            let env = io::read_linear(dir.join("env.pfm")).map_err(|e| e.in_stage("bake"))?;
            io::write_linear(&env, out.join("env.hdr")).map_err(|e| e.in_stage("bake"))?;
            report.bake = Some(b);
        }
    } else if cfg.emitters.is_some() || cfg.bake.is_some() {
        log::warn!("no poses configured; skipping the splat stages");
    }

    write_json(&report, &out.join("report.json")).map_err(|e| e.in_stage("report"))?;
    let reused = cache.reused.into_inner().unwrap();
    Ok(PipelineOutcome {
        report,
        output_dir: out,
        reused,
    })
}

#[derive(Serialize, Deserialize)]
struct MergeRecord {
    expansion: ExpansionSummary,
}

fn merge_stage(cfg: &PipelineConfig, cache: &Cache, path: &Path, name: &str) -> Result<Merged> {
    let gt_path = cfg.inputs.ground_truth.as_ref().and_then(|d| find_ground_truth(d, name));
    let gt = match &gt_path {
        Some(p) => Some((io::read_linear(p)?, file_sha(p)?)),
        None => None,
    };
    if matches!(cfg.predictor, PredictorConfig::Oracle) && gt.is_none() {
        return Err(Error::invalid(format!("no ground truth named {name}.hdr or {name}.pfm")));
    }
    let predictor = match &cfg.predictor {
        // the timeout cannot change a successful result
        PredictorConfig::External { command, .. } => serde_json::json!({ "kind": "external", "command": command }),
        other => serde_json::to_value(other)?,
    };
    let key = key_of(&serde_json::json!({
        "stage": "expand-merge",
        "image": file_sha(path)?,
        "gt": if matches!(cfg.predictor, PredictorConfig::Oracle) { gt.as_ref().map(|g| g.1.clone()) } else { None },
        "predictor": predictor,
        "expand": cfg.expand,
        "merge": cfg.merge,
        "panorama": cfg.panorama,
        "face_size": cfg.face_size,
    }));
    let (rec, dir) = cache.stage("expand-merge", &key, |tmp| {
        let i0 = io::read_display(path, Transfer::Gamma22)?;
        let (hdr, expansion) = expand_merge(&i0, gt.as_ref().map(|g| &g.0), cfg)?;
        io::write_linear(&hdr, tmp.join("merged.pfm"))?;
        Ok(MergeRecord { expansion })
    })?;
    Ok(Merged {
        name: name.to_string(),
        key,
        hdr: io::read_linear(dir.join("merged.pfm"))?,
        gt,
        expansion: rec.expansion,
    })
}

fn relight_stage(cfg: &PipelineConfig, cache: &Cache, m: &Merged, out: &Path) -> Result<Option<RelightReport>> {
    let (Some(rcfg), Some((gt, gt_sha))) = (&cfg.relight, &m.gt) else {
        return Ok(None);
    };
    let key = key_of(&serde_json::json!({
        "stage": "relight",
        "pred": m.key,
        "gt": gt_sha,
        "config": rcfg,
    }));
    let (r, dir) = cache.stage("relight", &key, |tmp| {
        let template = PartialIbl::new(LinearImage::zeros(1, 1)).with_view(Vec3::Z, Vec3::Y, rcfg.fov_deg.to_radians());
        let (rep, rp, rg) = evaluate_pair(&m.hdr, gt, &rcfg.scene, &template, &rcfg.compare)?;
        io::write_linear(&rp, tmp.join("pred.pfm"))?;
        io::write_linear(&rg, tmp.join("gt.pfm"))?;
        Ok(rep)
    })?;
    for which in ["pred", "gt"] {
        let img = io::read_linear(dir.join(format!("{which}.pfm")))?;
        io::write_linear(&img, out.join(format!("{}_{which}.hdr", m.name)))?;
    }
    Ok(Some(r))
}

fn fit_stage(cfg: &PipelineConfig, cache: &Cache, poses: &Path, merged: &[Merged]) -> Result<(GsReport, PathBuf)> {
    let transforms = read_transforms(poses)?;
    let by_name: BTreeMap<&str, &Merged> = merged.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut views = Vec::with_capacity(transforms.frames.len());
    let mut keys = Vec::with_capacity(transforms.frames.len());
    for (i, f) in transforms.frames.iter().enumerate() {
        let name = stem(Path::new(&f.file_path));
        let m = by_name
            .get(name.as_str())
            .ok_or_else(|| Error::invalid(format!("pose frame '{}' has no matching input image", f.file_path)))?;
        let (w, h) = m.hdr.dims();
        views.push(CameraView::new(transforms.camera(i, w, h), m.hdr.clone())?);
        keys.push(m.key.clone());
    }
    let init = &cfg.gs.init;
    let points_sha = init.points.as_deref().map(file_sha).transpose()?;
    let key = key_of(&serde_json::json!({
        "stage": "fit-gs",
        "views": keys,
        "poses": file_sha(poses)?,
        "init": init,
        "points": points_sha,
        "fit": cfg.gs.fit,
    }));
    let (rep, dir) = cache.stage("fit-gs", &key, |tmp| {
        let points: Vec<Vec3> = match &init.points {
            Some(p) => {
                let s = read_ply(p)?;
                (0..s.len()).map(|i| s.position(i)).collect()
            }
            None => random_points(
                init.random_points,
                Vec3::from_array(init.bounds[0]),
                Vec3::from_array(init.bounds[1]),
                cfg.gs.fit.seed,
            ),
        };
        let scene = init_from_points(&points, None, init.sh_degree, init.opacity)?;
        let result = fit(&views, scene, &cfg.gs.fit)?;
        write_ply(&result.scene, tmp.join("scene.ply"))?;
        Ok(GsReport {
            views: views.len(),
            gaussians: result.scene.len(),
            iterations: result.history.len(),
            final_loss: result.final_loss.total,
            final_l1: result.final_loss.l1,
            final_ssim: result.final_loss.ssim,
        })
    })?;
    Ok((rep, dir.join("scene.ply")))
}
