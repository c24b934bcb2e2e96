//! Known scenes and camera rigs for self-reconstruction experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::camera::{Camera, CameraView};
use super::raster::render;
use super::scene::{Gaussian, GaussianScene};
use super::sh;
use crate::error::Result;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    /// Means are uniform in a ball of this radius around the origin.
    pub radius: f64,
    pub scale_range: (f64, f64),
    pub opacity_range: (f64, f64),
    /// Radiance is log-uniform in this range per gaussian, with a random tint.
    pub radiance_range: (f64, f64),
    pub degree: usize,
    /// Magnitude of higher-order SH coefficients relative to the DC radiance.
    pub view_dependence: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count: 50,
            radius: 0.8,
            scale_range: (0.06, 0.18),
            opacity_range: (0.5, 0.9),
            radiance_range: (0.05, 4.0),
            degree: 1,
            view_dependence: 0.1,
        }
    }
}

pub fn random_scene(spec: &SyntheticSpec, seed: u64) -> Result<GaussianScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gs = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let p = loop {
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if p.length() <= 1.0 {
                break p * spec.radius;
            }
        };
        let (lo, hi) = spec.radiance_range;
        let lum = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        let tint = [0, 1, 2].map(|_| rng.random_range(0.5..1.0));
        let mut g = Gaussian::isotropic(p, 1.0, rng.random_range(spec.opacity_range.0..spec.opacity_range.1), [0.0; 3], spec.degree);
        g.scale = [0, 1, 2].map(|_| rng.random_range(spec.scale_range.0..spec.scale_range.1));
        g.rotation = [0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0));
        for (k, c) in g.sh.iter_mut().enumerate() {
            for ch in 0..3 {
                let dc = sh::dc_from_radiance(lum * tint[ch]);
                c[ch] = if k == 0 { dc } else { dc * spec.view_dependence * rng.random_range(-1.0..1.0) };
            }
        }
        gs.push(g);
    }
    GaussianScene::from_gaussians(spec.degree, &gs)
}

/// `n` cameras on a circle of `radius` at height `elevation`, looking at the origin.
pub fn orbit_cameras(n: usize, radius: f64, elevation: f64, vfov: f64, width: usize, height: usize) -> Result<Vec<Camera>> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let eye = Vec3::new(radius * a.sin(), elevation, radius * a.cos());
            Camera::look_at(eye, Vec3::ZERO, Vec3::Y, vfov, width, height)
        })
        .collect()
}

pub fn render_views(scene: &GaussianScene, cams: &[Camera]) -> Result<Vec<CameraView>> {
    cams.iter()
        .map(|c| CameraView::new(c.clone(), render(scene, c)?))
        .collect()
}

/// Gaussian means displaced by isotropic noise of standard deviation `sigma`.
pub fn jittered_points(scene: &GaussianScene, sigma: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..scene.len())
        .map(|i| scene.position(i) + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect()
}
