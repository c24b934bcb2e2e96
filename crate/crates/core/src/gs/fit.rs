//! Adam fitting of a Gaussian scene to posed HDR views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::CameraView;
use super::loss::{loss_with_grad, LossParts};
use super::raster::{rasterize, RasterSettings};
use super::scene::{Gaussian, GaussianScene};
use super::sh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Adam step sizes per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub position: f64,
    /// Position step at the last iteration; decays exponentially from `position`.
    pub position_final: f64,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    /// Scaled by the current radiance where it exceeds 1.
    pub sh_dc: f64,
    pub sh_rest: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 2e-3,
            position_final: 2e-5,
            log_scale: 1e-2,
            rotation: 5e-3,
            opacity: 5e-2,
            sh_dc: 5e-2,
            sh_rest: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifyConfig {
    pub start: usize,
    pub stop: usize,
    pub interval: usize,
    /// Mean position-gradient norm above which a gaussian is split.
    pub grad_threshold: f64,
    pub prune_opacity: f64,
    pub max_gaussians: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            start: 200,
            stop: 1500,
            interval: 100,
            grad_threshold: 2e-4,
            prune_opacity: 0.005,
            max_gaussians: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    /// Weight of the SSIM term.
    pub lambda: f64,
    pub lr: LearningRates,
    pub seed: u64,
    pub background: [f64; 3],
    /// Off unless set.
    pub densify: Option<DensifyConfig>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            lambda: 0.2,
            lr: LearningRates::default(),
            seed: 0,
            background: [0.0; 3],
            densify: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub scene: GaussianScene,
    /// Mean loss over views, per iteration.
    pub history: Vec<f64>,
    pub final_loss: LossParts,
}

/// Gaussians seeded at `points`, sized from the mean distance to the three
/// nearest neighbours. Colors default to mid gray.
pub fn init_from_points(
    points: &[Vec3],
    colors: Option<&[[f64; 3]]>,
    degree: usize,
    opacity: f64,
) -> Result<GaussianScene> {
    if points.is_empty() {
        return Err(Error::invalid("need at least one initial point"));
    }
    if colors.is_some_and(|c| c.len() != points.len()) {
        return Err(Error::invalid("colors must match points"));
    }
    let mut scene = GaussianScene::new(degree)?;
    for (i, &p) in points.iter().enumerate() {
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &q)| (q - p).length())
            .collect();
        d.sort_by(f64::total_cmp);
        let k = d.len().min(3);
        let sigma = if k == 0 { 0.1 } else { (d[..k].iter().sum::<f64>() / k as f64).max(1e-4) * 0.5 };
        let rgb = colors.map_or([0.5; 3], |c| c[i]);
        scene.push(&Gaussian::isotropic(p, sigma, opacity, rgb, degree))?;
    }
    Ok(scene)
}

/// `n` points uniform in the axis-aligned box `[lo, hi]`.
pub fn random_points(n: usize, lo: Vec3, hi: Vec3, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Vec3::new(
                lo.x + rng.random::<f64>() * (hi.x - lo.x),
                lo.y + rng.random::<f64>() * (hi.y - lo.y),
                lo.z + rng.random::<f64>() * (hi.z - lo.z),
            )
        })
        .collect()
}

/// Loss and parameter gradient summed over views, in view order.
pub fn loss_and_grad(
    scene: &GaussianScene,
    views: &[CameraView],
    lambda: f64,
    settings: &RasterSettings,
) -> Result<(LossParts, GaussianScene)> {
    let per_view: Vec<Result<(LossParts, GaussianScene)>> = views
        .par_iter()
        .map(|v| {
            let r = rasterize(scene, &v.camera, settings)?;
            let target: Vec<f64> = v.target.data().iter().map(|&x| x as f64).collect();
            let (parts, dl) = loss_with_grad(&r.image, &target, r.width, r.height, lambda);
            Ok((parts, r.backward(scene, &dl)?))
        })
        .collect();
    let n = views.len() as f64;
    let mut total = LossParts { total: 0.0, l1: 0.0, ssim: 0.0 };
    let mut grad = scene.zeros_like();
    for item in per_view {
        let (p, g) = item?;
        total.total += p.total / n;
        total.l1 += p.l1 / n;
        total.ssim += p.ssim / n;
        let mut dst = grad.groups_mut();
        for (gi, src) in g.group_values().iter().enumerate() {
            for (d, s) in dst[gi].iter_mut().zip(src) {
                **d += s / n;
            }
        }
    }
    Ok((total, grad))
}

struct Adam {
    m: GaussianScene,
    v: GaussianScene,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-15;

impl Adam {
    fn new(scene: &GaussianScene) -> Self {
        Self {
            m: scene.zeros_like(),
            v: scene.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, scene: &mut GaussianScene, grad: &GaussianScene, lrs: [f64; 6]) {
        self.t += 1;
        let (b1t, b2t) = (1.0 - BETA1.powi(self.t), 1.0 - BETA2.powi(self.t));
        let gv = grad.group_values();
        let mut ps = scene.groups_mut();
        let mut ms = self.m.groups_mut();
        let mut vs = self.v.groups_mut();
        for k in 0..6 {
            for (((p, m), v), g) in ps[k].iter_mut().zip(ms[k].iter_mut()).zip(vs[k].iter_mut()).zip(&gv[k]) {
                **m = BETA1 * **m + (1.0 - BETA1) * g;
                **v = BETA2 * **v + (1.0 - BETA2) * g * g;
                let mh = **m / b1t;
                let vh = **v / b2t;
                // DC steps grow with the radiance so bright emitters are reachable
                let rel = if k == 4 { (p.abs() * sh::C0).max(1.0) } else { 1.0 };
                **p -= rel * lrs[k] * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Fits `init` to `views`. Deterministic for fixed inputs: views are reduced in
/// order and the only randomness (densification offsets) is seeded.
pub fn fit(views: &[CameraView], init: GaussianScene, cfg: &FitConfig) -> Result<FitResult> {
    if views.len() < 2 {
        return Err(Error::invalid("fitting needs at least two views"));
    }
    if init.is_empty() {
        return Err(Error::invalid("fitting needs a nonempty initial scene"));
    }
    init.check_finite()?;
    let settings = RasterSettings { background: cfg.background };
    let mut scene = init;
    scene.normalize_rotations();
    let mut adam = Adam::new(&scene);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut grad_accum = vec![0.0; scene.len()];
    let mut last = LossParts { total: f64::NAN, l1: f64::NAN, ssim: f64::NAN };
    let lr = cfg.lr;
    for it in 0..cfg.iterations {
        let (parts, grad) = loss_and_grad(&scene, views, cfg.lambda, &settings)?;
        if !parts.total.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                message: format!("loss {} (l1 {}, ssim {}) with {} gaussians", parts.total, parts.l1, parts.ssim, scene.len()),
            });
        }
        history.push(parts.total);
        last = parts;
        if it % 100 == 0 {
            log::debug!("iter {it}: loss {:.6} l1 {:.6} ssim {:.4}", parts.total, parts.l1, parts.ssim);
        }
        let frac = if cfg.iterations > 1 { it as f64 / (cfg.iterations - 1) as f64 } else { 0.0 };
        let pos_lr = lr.position * (lr.position_final / lr.position).powf(frac);
        adam.step(&mut scene, &grad, [pos_lr, lr.log_scale, lr.rotation, lr.opacity, lr.sh_dc, lr.sh_rest]);
        scene.normalize_rotations();

        if let Some(d) = &cfg.densify {
            for (a, g) in grad_accum.iter_mut().zip(&grad.positions) {
                *a += (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            }
            if it >= d.start && it < d.stop && (it + 1 - d.start) % d.interval.max(1) == 0 {
                densify(&mut scene, &mut adam, &grad_accum, d, &mut rng);
                grad_accum = vec![0.0; scene.len()];
            }
        }
    }
    if cfg.iterations > 0 {
        // loss of the returned parameters
        last = loss_and_grad(&scene, views, cfg.lambda, &settings)?.0;
    }
    Ok(FitResult {
        scene,
        history,
        final_loss: last,
    })
}

fn densify(scene: &mut GaussianScene, adam: &mut Adam, accum: &[f64], d: &DensifyConfig, rng: &mut ChaCha8Rng) {
    let n = scene.len();
    let interval = d.interval.max(1) as f64;
    let keep: Vec<bool> = (0..n).map(|i| scene.opacity(i) >= d.prune_opacity).collect();
    let split: Vec<usize> = (0..n)
        .filter(|&i| keep[i] && accum[i] / interval > d.grad_threshold)
        .take(d.max_gaussians.saturating_sub(n))
        .collect();
    for &i in &split {
        let sigma = scene.scale(i).into_iter().fold(0.0, f64::max);
        let dir = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalized();
        scene.push_from(&scene.clone(), i);
        adam.m.push_from(&adam.m.clone(), i);
        adam.v.push_from(&adam.v.clone(), i);
        let j = scene.len() - 1;
        for (k, sgn) in [(i, 1.0), (j, -1.0)] {
            for a in 0..3 {
                scene.positions[k][a] += sgn * 0.5 * sigma * dir[a];
                scene.log_scales[k][a] -= 1.6f64.ln();
            }
        }
    }
    let mut keep = keep;
    keep.resize(scene.len(), true);
    scene.retain(&keep);
    adam.m.retain(&keep);
    adam.v.retain(&keep);
    log::debug!("densify: split {}, now {} gaussians", split.len(), scene.len());
}
