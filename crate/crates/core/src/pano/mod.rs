//! Equirectangular panoramas: perspective crops and cube-map conversion.
//!
//! Direction convention: +Y up, the panorama center column looks down +Z and
//! longitude increases toward +X. Pixel centers sit at half-integer coordinates.

mod crop;
mod cube;
mod params;

pub use crop::{camera_rotation, pano_to_perspective, perspective_project, render_crop};
pub use cube::{cubemap_to_equirect, equirect_to_cubemap, CubeFace, CubeMap};
pub use params::{sample_params, sample_params_with, PanoSample};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::color::{DisplayImage, LinearImage};
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Images that expose raw interleaved RGB samples; lets the geometric
/// resamplers work on both linear and display data.
pub trait RgbPlane: Sized + Sync {
    fn dims(&self) -> (usize, usize);
    fn samples(&self) -> &[f32];
    /// A new image of the same kind (and transfer tag, if any) from resampled data.
    fn with_samples(&self, width: usize, height: usize, data: Vec<f32>) -> Self;
}

impl RgbPlane for LinearImage {
    fn dims(&self) -> (usize, usize) {
        LinearImage::dims(self)
    }
    fn samples(&self) -> &[f32] {
        self.data()
    }
    fn with_samples(&self, width: usize, height: usize, data: Vec<f32>) -> Self {
        LinearImage::new(width, height, data).expect("resampling preserves valid samples")
    }
}

impl RgbPlane for DisplayImage {
    fn dims(&self) -> (usize, usize) {
        DisplayImage::dims(self)
    }
    fn samples(&self) -> &[f32] {
        self.data()
    }
    fn with_samples(&self, width: usize, height: usize, data: Vec<f32>) -> Self {
        DisplayImage::new(width, height, data, self.transfer())
            .expect("resampling preserves valid samples")
    }
}

pub(crate) fn check_equirect(dims: (usize, usize)) -> Result<()> {
    let (w, h) = dims;
    if h == 0 || w != 2 * h {
        return Err(Error::invalid(format!(
            "equirectangular panorama must be 2:1, got {w}x{h}"
        )));
    }
    Ok(())
}

/// Unit direction for continuous equirect coordinates.
pub fn equirect_dir(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    let lon = u / width as f64 * TAU - PI;
    let lat = FRAC_PI_2 - v / height as f64 * PI;
    let (sl, cl) = lat.sin_cos();
    Vec3::new(cl * lon.sin(), sl, cl * lon.cos())
}

/// Continuous equirect coordinates of a direction.
pub fn equirect_coords(d: Vec3, width: usize, height: usize) -> (f64, f64) {
    let d = d.normalized();
    let lon = d.x.atan2(d.z);
    let lat = d.y.clamp(-1.0, 1.0).asin();
    let u = (lon + PI) / TAU * width as f64;
    let v = (FRAC_PI_2 - lat) / PI * height as f64;
    (u.rem_euclid(width as f64), v)
}

/// Direction through the center of equirect pixel `(x, y)`.
pub fn equirect_pixel_dir(x: usize, y: usize, width: usize, height: usize) -> Vec3 {
    equirect_dir(x as f64 + 0.5, y as f64 + 0.5, width, height)
}

/// Bilinear lookup at continuous coordinates; `wrap_x` wraps longitude,
/// otherwise both axes clamp to the edge.
pub(crate) fn bilinear(data: &[f32], width: usize, height: usize, u: f64, v: f64, wrap_x: bool) -> [f32; 3] {
    let fx = u - 0.5;
    let fy = (v - 0.5).clamp(0.0, (height - 1) as f64);
    let y0 = fy.floor() as usize;
    let y1 = (y0 + 1).min(height - 1);
    let ty = fy - y0 as f64;

    let (x0, x1, tx) = if wrap_x {
        let x0f = fx.floor();
        let tx = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(width as i64) as usize;
        (x0, (x0 + 1) % width, tx)
    } else {
        let fx = fx.clamp(0.0, (width - 1) as f64);
        let x0 = fx.floor() as usize;
        ((x0), (x0 + 1).min(width - 1), fx - x0 as f64)
    };

    let at = |x: usize, y: usize, c: usize| data[(y * width + x) * 3 + c] as f64;
    let mut out = [0.0f32; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = at(x0, y0, c) * (1.0 - tx) + at(x1, y0, c) * tx;
        let bot = at(x0, y1, c) * (1.0 - tx) + at(x1, y1, c) * tx;
        *o = (top * (1.0 - ty) + bot * ty) as f32;
    }
    out
}

pub(crate) fn sample_equirect(data: &[f32], width: usize, height: usize, d: Vec3) -> [f32; 3] {
    let (u, v) = equirect_coords(d, width, height);
    bilinear(data, width, height, u, v, true)
}
