//! Equirectangular environment maps baked from a Gaussian scene by per-ray
//! compositing.

use rayon::prelude::*;

use super::raster::{ALPHA_MAX, POWER_CUTOFF};
use super::scene::{normalize_quat, quat_to_mat, GaussianScene};
use super::sh;
use crate::color::LinearImage;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::pano::equirect_pixel_dir;

/// Rays ignore gaussians whose closest approach is this close or behind the origin.
const NEAR: f64 = 1e-6;

struct Prepared {
    mean: Vec3,
    inv_cov: Mat3,
    opacity: f64,
}

fn inverse_covariance(scene: &GaussianScene, i: usize) -> Mat3 {
    let r = quat_to_mat(normalize_quat(scene.rotations[i]).0);
    let s = scene.scale(i);
    let ri = Mat3::from_cols(r.col(0) * (1.0 / s[0]), r.col(1) * (1.0 / s[1]), r.col(2) * (1.0 / s[2]));
    ri * ri.transpose()
}

/// Radiance along the ray `o + t d` (unit `d`): each gaussian contributes at its
/// peak along the ray, `alpha = min(0.99, opacity * exp(-power))`, composited
/// front to back in order of that peak's distance.
fn trace(scene: &GaussianScene, prep: &[Prepared], o: Vec3, d: Vec3, hits: &mut Vec<(f64, usize, f64)>) -> [f64; 3] {
    hits.clear();
    for (i, p) in prep.iter().enumerate() {
        let m = p.mean - o;
        let sd = p.inv_cov.mul_vec(d);
        let a = d.dot(sd);
        let b = m.dot(sd);
        let t = b / a;
        if !(t > NEAR) {
            continue;
        }
        let power = 0.5 * (m.dot(p.inv_cov.mul_vec(m)) - b * b / a).max(0.0);
        if power > POWER_CUTOFF {
            continue;
        }
        hits.push((t, i, (p.opacity * (-power).exp()).min(ALPHA_MAX)));
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut c = [0.0; 3];
    let mut tr = 1.0;
    for &(_, i, alpha) in hits.iter() {
        let col = sh::eval(scene.sh_of(i), (prep[i].mean - o).normalized());
        for ch in 0..3 {
            c[ch] += tr * alpha * col[ch];
        }
        tr *= 1.0 - alpha;
    }
    c
}

/// Linear HDR equirectangular panorama (`width` x `width / 2`) seen from `at`.
pub fn bake_envmap(scene: &GaussianScene, at: Vec3, width: usize) -> Result<LinearImage> {
    if width < 2 || width % 2 != 0 {
        return Err(Error::invalid(format!("envmap width must be even and >= 2, got {width}")));
    }
    let height = width / 2;
    let prep: Vec<Prepared> = (0..scene.len())
        .map(|i| Prepared {
            mean: scene.position(i),
            inv_cov: inverse_covariance(scene, i),
            opacity: scene.opacity(i),
        })
        .collect();
    let mut data = vec![0.0f32; width * height * 3];
    data.par_chunks_mut(width * 3).enumerate().for_each(|(y, row)| {
        let mut hits = Vec::new();
        for x in 0..width {
            let d = equirect_pixel_dir(x, y, width, height);
            let c = trace(scene, &prep, at, d, &mut hits);
            for ch in 0..3 {
                row[x * 3 + ch] = c[ch] as f32;
            }
        }
    });
    LinearImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gs::scene::Gaussian;

    fn peak_dir(img: &LinearImage) -> Vec3 {
        let (w, h) = img.dims();
        let mut best = (f32::MIN, 0, 0);
        for y in 0..h {
            for x in 0..w {
                let v = img.pixel(x, y)[0];
                if v > best.0 {
                    best = (v, x, y);
                }
            }
        }
        equirect_pixel_dir(best.1, best.2, w, h)
    }

    fn emitter(at: Vec3) -> GaussianScene {
        GaussianScene::from_gaussians(0, &[Gaussian::isotropic(at, 0.02, 0.9, [20.0; 3], 0)]).unwrap()
    }

    #[test]
    fn empty_scene_is_black() {
        let img = bake_envmap(&GaussianScene::new(0).unwrap(), Vec3::ZERO, 32).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn emitter_ahead_peaks_at_plus_z() {
        let s = GaussianScene::from_gaussians(0, &[Gaussian::isotropic(Vec3::new(0.0, 0.0, 2.0), 0.1, 0.9, [20.0; 3], 0)]).unwrap();
        let img = bake_envmap(&s, Vec3::ZERO, 128).unwrap();
        let d = peak_dir(&img);
        // the +Z texel centers sit half a texel off the axis
        assert!(d.dot(Vec3::Z) > (1.5 * std::f64::consts::PI / 64.0).cos(), "{d:?}");
        assert!(img.max_value() > 10.0);
    }

    #[test]
    fn parallax_matches_geometry() {
        let scene = emitter(Vec3::new(0.0, 0.0, 1.0));
        let o = Vec3::new(0.3, 0.0, 0.0);
        let a = peak_dir(&bake_envmap(&scene, Vec3::ZERO, 256).unwrap());
        let b = peak_dir(&bake_envmap(&scene, o, 256).unwrap());
        let shift = a.dot(b).clamp(-1.0, 1.0).acos().to_degrees();
        let expect = 0.3f64.atan().to_degrees();
        assert!((shift - expect).abs() < 2.0, "{shift} vs {expect}");
        assert!(b.x < 0.0);
    }

    #[test]
    fn nearer_gaussian_occludes() {
        let near = Gaussian::isotropic(Vec3::new(0.0, 0.0, 1.0), 0.2, 0.95, [0.0, 1.0, 0.0], 0);
        let far = Gaussian::isotropic(Vec3::new(0.0, 0.0, 3.0), 0.2, 0.95, [1.0, 0.0, 0.0], 0);
        for order in [[near.clone(), far.clone()], [far, near]] {
            let s = GaussianScene::from_gaussians(0, &order).unwrap();
            let img = bake_envmap(&s, Vec3::ZERO, 64).unwrap();
            let px = img.pixel(32, 16);
            assert!(px[1] > 0.85 && px[0] < 0.1, "{px:?}");
        }
    }
}
