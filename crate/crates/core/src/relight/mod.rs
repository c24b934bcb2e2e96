//! Evaluation renderer: a mirror sphere resting on a diffuse plane, lit by an
//! HDR image projected onto a partial hemisphere.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::LinearImage;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::metrics::{align_exposure, CompareOptions, RelightReport};
use crate::pano::bilinear;

/// A perspective image used as the only lit part of the environment.
#[derive(Debug, Clone)]
pub struct PartialIbl {
    pub image: LinearImage,
    /// Vertical field of view, radians.
    pub fov: f64,
    pub forward: Vec3,
    /// Hint for the image's up direction; need not be orthogonal to `forward`.
    pub up: Vec3,
    pub outside: [f32; 3],
}

impl PartialIbl {
    /// 90 degree field of view looking along +Z, black outside.
    pub fn new(image: LinearImage) -> Self {
        Self {
            image,
            fov: PI / 2.0,
            forward: Vec3::Z,
            up: Vec3::Y,
            outside: [0.0; 3],
        }
    }

    pub fn with_view(mut self, forward: Vec3, up: Vec3, fov: f64) -> Self {
        self.forward = forward;
        self.up = up;
        self.fov = fov;
        self
    }

    pub fn with_outside(mut self, outside: [f32; 3]) -> Self {
        self.outside = outside;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(Error::invalid(format!("ibl fov must be in (0, pi), got {}", self.fov)));
        }
        if self.forward.length() == 0.0 || self.forward.cross(self.up).length() < 1e-9 {
            return Err(Error::invalid("ibl forward and up must be nonzero and not parallel"));
        }
        let (w, h) = self.image.dims();
        if w == 0 || h == 0 {
            return Err(Error::invalid("ibl image is empty"));
        }
        Ok(())
    }

    /// Orthonormal (right, up, forward). Right is `forward x up`, so the image
    /// is seen unmirrored from inside the sphere.
    fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let f = self.forward.normalized();
        let r = f.cross(self.up).normalized();
        (r, r.cross(f), f)
    }
}

/// Radiance arriving from direction `dir`. Directions exactly on the frustum
/// boundary count as inside and sample the edge texels.
pub fn ibl_lookup(ibl: &PartialIbl, dir: Vec3) -> [f32; 3] {
    let (r, u, f) = ibl.frame();
    lookup_in_frame(ibl, (r, u, f), dir)
}

fn lookup_in_frame(ibl: &PartialIbl, (r, u, f): (Vec3, Vec3, Vec3), dir: Vec3) -> [f32; 3] {
    let c = dir.dot(f);
    if c <= 0.0 {
        return ibl.outside;
    }
    let (w, h) = ibl.image.dims();
    let ty = (ibl.fov / 2.0).tan();
    let tx = ty * w as f64 / h as f64;
    let x = dir.dot(r) / c / tx;
    let y = dir.dot(u) / c / ty;
    // a little slack so directions built at exactly half the fov stay inside
    if x.abs() > 1.0 + 1e-12 || y.abs() > 1.0 + 1e-12 {
        return ibl.outside;
    }
    let px = (x + 1.0) / 2.0 * w as f64;
    let py = (1.0 - y) / 2.0 * h as f64;
    bilinear(ibl.image.data(), w, h, px, py, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub sphere_center: Vec3,
    pub sphere_radius: f64,
    pub plane_height: f64,
    pub camera_position: Vec3,
    pub camera_target: Vec3,
    /// Vertical field of view, degrees.
    pub camera_vfov: f64,
    pub width: usize,
    pub height: usize,
    pub sphere_albedo: f64,
    pub plane_albedo: f64,
    /// Cosine-weighted samples per plane pixel.
    pub samples: usize,
    pub seed: u64,
    /// Occlusion of plane samples by the sphere. Off only for furnace checks.
    pub cast_shadows: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            sphere_center: Vec3::new(0.0, 1.0, 0.0),
            sphere_radius: 1.0,
            plane_height: 0.0,
            camera_position: Vec3::new(0.0, 1.0, 3.0),
            camera_target: Vec3::new(0.0, 1.0, 0.0),
            camera_vfov: 40.0,
            width: 256,
            height: 256,
            sphere_albedo: 1.0,
            plane_albedo: 0.5,
            samples: 1024,
            seed: 0,
            cast_shadows: true,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let rests = (self.sphere_center.y - self.plane_height - self.sphere_radius).abs() <= 1e-9;
        if !(self.sphere_radius > 0.0) || !rests {
            return Err(Error::invalid("sphere must have positive radius and rest on the plane"));
        }
        if self.width == 0 || self.height == 0 || self.samples == 0 {
            return Err(Error::invalid("render size and sample count must be positive"));
        }
        if !(self.camera_vfov > 0.0 && self.camera_vfov < 180.0) {
            return Err(Error::invalid("camera vfov must be in (0, 180) degrees"));
        }
        if (self.camera_target - self.camera_position).cross(Vec3::Y).length() < 1e-9 {
            return Err(Error::invalid("camera must not look straight up or down"));
        }
        Ok(())
    }

    /// Unit primary ray through the center of pixel `(x, y)`.
    pub fn camera_ray(&self, x: usize, y: usize) -> Vec3 {
        let f = (self.camera_target - self.camera_position).normalized();
        let r = f.cross(Vec3::Y).normalized();
        let u = r.cross(f);
        let t = (self.camera_vfov.to_radians() / 2.0).tan();
        let a = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * t * self.width as f64 / self.height as f64;
        let b = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * t;
        (f + r * a + u * b).normalized()
    }

    /// Nearest positive hit distance of the ray with the sphere.
    fn hit_sphere(&self, o: Vec3, d: Vec3) -> Option<f64> {
        let oc = o - self.sphere_center;
        let b = oc.dot(d);
        let c = oc.dot(oc) - self.sphere_radius * self.sphere_radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        [-b - s, -b + s].into_iter().find(|&t| t > 1e-9)
    }

    fn hit_plane(&self, o: Vec3, d: Vec3) -> Option<f64> {
        if d.y >= 0.0 {
            return None;
        }
        let t = (self.plane_height - o.y) / d.y;
        (t > 1e-9).then_some(t)
    }
}

/// What a primary ray hits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Sphere { point: Vec3, normal: Vec3 },
    Plane { point: Vec3 },
    Environment,
}

pub fn trace(scene: &SceneSpec, d: Vec3) -> Surface {
    let o = scene.camera_position;
    let ts = scene.hit_sphere(o, d);
    let tp = scene.hit_plane(o, d);
    match (ts, tp) {
        (Some(t), p) if p.is_none_or(|tp| t <= tp) => {
            let point = o + d * t;
            Surface::Sphere {
                point,
                normal: ((point - scene.sphere_center) * (1.0 / scene.sphere_radius)).normalized(),
            }
        }
        (_, Some(t)) => Surface::Plane { point: o + d * t },
        _ => Surface::Environment,
    }
}

/// Stratified cosine-weighted directions about +Y for one pixel, drawn from a
/// stream keyed by the pixel index.
fn plane_directions(scene: &SceneSpec, pixel: u64) -> impl Iterator<Item = Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(pixel);
    let n = scene.samples;
    let m = (n as f64).sqrt().floor() as usize;
    let strata = m * m;
    (0..n).map(move |s| {
        let (j1, j2): (f64, f64) = (rng.random(), rng.random());
        let (u1, u2) = if s < strata {
            (((s % m) as f64 + j1) / m as f64, ((s / m) as f64 + j2) / m as f64)
        } else {
            (j1, j2)
        };
        let r = u1.sqrt();
        let phi = 2.0 * PI * u2;
        Vec3::new(r * phi.cos(), (1.0 - u1).max(0.0).sqrt(), r * phi.sin())
    })
}

/// Direct-lighting render. Mirror pixels read the reflected direction, plane
/// pixels average cosine-weighted lookups (the estimator of albedo/pi times
/// the cosine integral), missed rays read the environment.
pub fn render(scene: &SceneSpec, ibl: &PartialIbl) -> Result<LinearImage> {
    scene.validate()?;
    ibl.validate()?;
    let frame = ibl.frame();
    let (w, h) = (scene.width, scene.height);
    let mut data = vec![0.0f32; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let d = scene.camera_ray(x, y);
            let rgb: [f64; 3] = match trace(scene, d) {
                Surface::Environment => lookup_in_frame(ibl, frame, d).map(f64::from),
                Surface::Sphere { normal, .. } => {
                    lookup_in_frame(ibl, frame, d.reflect(normal)).map(|v| v as f64 * scene.sphere_albedo)
                }
                Surface::Plane { point } => {
                    let mut acc = [0.0f64; 3];
                    let origin = point + Vec3::Y * 1e-7;
                    for dir in plane_directions(scene, (y * w + x) as u64) {
                        if scene.cast_shadows && scene.hit_sphere(origin, dir).is_some() {
                            continue;
                        }
                        let l = lookup_in_frame(ibl, frame, dir);
                        for c in 0..3 {
                            acc[c] += l[c] as f64;
                        }
                    }
                    acc.map(|a| a * scene.plane_albedo / scene.samples as f64)
                }
            };
            row[x * 3..x * 3 + 3].copy_from_slice(&rgb.map(|v| v as f32));
        }
    });
    LinearImage::new(w, h, data)
}

/// Renders with a predicted and a reference HDR image as light and compares
/// the renders. The prediction is first exposure-aligned to the reference.
pub fn evaluate_pair(
    pred: &LinearImage,
    gt: &LinearImage,
    scene: &SceneSpec,
    template: &PartialIbl,
    opts: &CompareOptions,
) -> Result<(RelightReport, LinearImage, LinearImage)> {
    pred.ensure_same_dims(gt)?;
    let (aligned, scale, fallback) = if opts.align {
        let a = align_exposure(pred, gt)?;
        (a.image, a.scale, a.fallback)
    } else {
        (pred.clone(), 1.0, false)
    };
    let light = |img: LinearImage| PartialIbl { image: img, ..template.clone() };
    let rp = render(scene, &light(aligned))?;
    let rg = render(scene, &light(gt.clone()))?;
    let report = RelightReport::from_images(&rp, &rg, opts, scale, fallback)?;
    Ok((report, rp, rg))
}
