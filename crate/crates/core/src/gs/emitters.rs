//! Emitter classification: gaussians bright enough to act as light sources.

use serde::{Deserialize, Serialize};

use super::scene::GaussianScene;
use super::sh;
use crate::color::REC709;
use crate::geom::{fibonacci_sphere, Vec3};

pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSet {
    pub threshold: f64,
    pub indices: Vec<usize>,
    /// Peak luminance over the sampled directions, per emitter.
    pub peak_radiance: Vec<f64>,
}

/// Largest luminance of the gaussian's SH radiance over `dirs`.
pub fn peak_luminance(coeffs: &[[f64; 3]], dirs: &[Vec3]) -> f64 {
    dirs.iter()
        .map(|&d| {
            let c = sh::eval(coeffs, d);
            REC709[0] as f64 * c[0] + REC709[1] as f64 * c[1] + REC709[2] as f64 * c[2]
        })
        .fold(0.0, f64::max)
}

/// A gaussian is an emitter when its luminance exceeds `threshold` along at
/// least one of `n_dirs` Fibonacci-sphere directions.
pub fn classify_emitters(scene: &GaussianScene, threshold: f64, n_dirs: usize) -> EmitterSet {
    let dirs = fibonacci_sphere(n_dirs.max(1));
    let mut set = EmitterSet {
        threshold,
        indices: Vec::new(),
        peak_radiance: Vec::new(),
    };
    for i in 0..scene.len() {
        let peak = peak_luminance(scene.sh_of(i), &dirs);
        if peak > threshold {
            set.indices.push(i);
            set.peak_radiance.push(peak);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gs::scene::Gaussian;

    fn scene_with(sh: Vec<[f64; 3]>, degree: usize) -> GaussianScene {
        let mut g = Gaussian::isotropic(Vec3::ZERO, 0.1, 0.5, [0.0; 3], degree);
        g.sh = sh;
        GaussianScene::from_gaussians(degree, &[g]).unwrap()
    }

    #[test]
    fn dc_only_examples() {
        let dim = scene_with(vec![[sh::dc_from_radiance(0.5); 3]], 0);
        assert!(classify_emitters(&dim, 1.0, 64).indices.is_empty());
        let bright = scene_with(vec![[sh::dc_from_radiance(8.0); 3]], 0);
        let e = classify_emitters(&bright, 1.0, 64);
        assert_eq!(e.indices, vec![0]);
        assert!((e.peak_radiance[0] - 8.0).abs() < 1e-5);
    }

    #[test]
    fn directional_lobe_counts() {
        // 0.9 DC plus a +z lobe; the oracle evaluates the same SH over the sample set
        let mut c = vec![[0.0; 3]; 4];
        c[0] = [sh::dc_from_radiance(0.9); 3];
        c[2] = [0.8; 3];
        let s = scene_with(c.clone(), 1);
        let dirs = fibonacci_sphere(64);
        let oracle = dirs
            .iter()
            .map(|d| 0.9 + 0.488_602_511_902_919_9 * 0.8 * d.z)
            .fold(f64::MIN, f64::max);
        assert!(oracle > 1.0);
        let e = classify_emitters(&s, 1.0, 64);
        assert_eq!(e.indices, vec![0]);
        assert!((e.peak_radiance[0] - oracle).abs() < 1e-6);
        // the DC term alone stays below threshold
        assert!(classify_emitters(&scene_with(vec![c[0]], 0), 1.0, 64).indices.is_empty());
    }
}
