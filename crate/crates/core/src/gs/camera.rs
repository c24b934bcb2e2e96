//! Pinhole cameras (OpenCV axes: +x right, +y down, +z forward) and the
//! NeRF-style `transforms.json` pose format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::{linearize, LinearImage};
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::io;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World to camera: `x_cam = rotation * x_world + translation`.
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Camera {
    /// Camera at `eye` looking at `target` with vertical field of view `vfov` (radians).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, vfov: f64, width: usize, height: usize) -> Result<Self> {
        let f = (target - eye).normalized();
        let x = f.cross(up);
        if !(x.length() > 1e-12) || !(vfov > 0.0 && vfov < std::f64::consts::PI) {
            return Err(Error::invalid("look_at needs a non-degenerate view and fov in (0, pi)"));
        }
        let x = x.normalized();
        let y = f.cross(x);
        let rotation = Mat3([x.to_array(), y.to_array(), f.to_array()]);
        let focal = 0.5 * height as f64 / (vfov / 2.0).tan();
        Ok(Self {
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            translation: -rotation.mul_vec(eye),
            rotation,
        })
    }

    pub fn center(&self) -> Vec3 {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Pixel coordinates (pixel centers at +0.5) and depth.
    pub fn project(&self, p: Vec3) -> (f64, f64, f64) {
        let c = self.to_camera(p);
        (self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite();
        if !ok {
            return Err(Error::invalid("camera needs positive size and focal lengths"));
        }
        Ok(())
    }

    /// Camera-to-world 4x4 in the OpenGL axes used by `transforms.json`.
    pub fn to_gl_c2w(&self) -> [[f64; 4]; 4] {
        let rt = self.rotation.transpose();
        let c = self.center();
        let flip = [1.0, -1.0, -1.0];
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = rt.0[i][j] * flip[j];
            }
            m[i][3] = c[i];
        }
        m[3][3] = 1.0;
        m
    }

    fn from_gl_c2w(m: &[[f64; 4]; 4], width: usize, height: usize, fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        let flip = [1.0, -1.0, -1.0];
        let mut c2w = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c2w[i][j] = m[i][j] * flip[j];
            }
        }
        let rotation = Mat3(c2w).transpose();
        let center = Vec3::new(m[0][3], m[1][3], m[2][3]);
        Self {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            translation: -rotation.mul_vec(center),
            rotation,
        }
    }
}

/// A posed training image.
#[derive(Debug, Clone)]
pub struct CameraView {
    pub camera: Camera,
    pub target: LinearImage,
}

impl CameraView {
    pub fn new(camera: Camera, target: LinearImage) -> Result<Self> {
        camera.validate()?;
        if target.dims() != (camera.width, camera.height) {
            return Err(Error::DimensionMismatch {
                expected: (camera.width, camera.height),
                got: target.dims(),
            });
        }
        Ok(Self { camera, target })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transforms {
    pub camera_angle_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_angle_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fl_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fl_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub file_path: String,
    pub transform_matrix: [[f64; 4]; 4],
}

impl Transforms {
    /// Shared intrinsics for `cams` (taken from the first camera).
    pub fn from_cameras(cams: &[(String, Camera)]) -> Result<Self> {
        let first = &cams.first().ok_or_else(|| Error::invalid("no cameras"))?.1;
        Ok(Self {
            camera_angle_x: 2.0 * (first.width as f64 / (2.0 * first.fx)).atan(),
            camera_angle_y: None,
            fl_x: Some(first.fx),
            fl_y: Some(first.fy),
            cx: Some(first.cx),
            cy: Some(first.cy),
            frames: cams
                .iter()
                .map(|(p, c)| Frame {
                    file_path: p.clone(),
                    transform_matrix: c.to_gl_c2w(),
                })
                .collect(),
        })
    }

    /// Camera for frame `i` given the image size.
    pub fn camera(&self, i: usize, width: usize, height: usize) -> Camera {
        let fx = self
            .fl_x
            .unwrap_or(0.5 * width as f64 / (self.camera_angle_x / 2.0).tan());
        let fy = self
            .fl_y
            .or(self.camera_angle_y.map(|a| 0.5 * height as f64 / (a / 2.0).tan()))
            .unwrap_or(fx);
        Camera::from_gl_c2w(
            &self.frames[i].transform_matrix,
            width,
            height,
            fx,
            fy,
            self.cx.unwrap_or(width as f64 / 2.0),
            self.cy.unwrap_or(height as f64 / 2.0),
        )
    }
}

pub fn read_transforms(path: &Path) -> Result<Transforms> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn resolve_image(base: &Path, file_path: &str, image_dir: Option<&Path>) -> Result<PathBuf> {
    let dir = image_dir.unwrap_or(base);
    let mut candidates = vec![dir.join(file_path)];
    if let Some(name) = Path::new(file_path).file_name() {
        candidates.push(dir.join(name));
    }
    for p in candidates {
        if p.is_file() {
            return Ok(p);
        }
        // same frame under another extension
        for ext in ["hdr", "pfm", "png"] {
            let q = p.with_extension(ext);
            if q.is_file() {
                return Ok(q);
            }
        }
    }
    Err(Error::invalid(format!("image for frame '{file_path}' not found under {}", dir.display())))
}

/// Reads poses and their images. Frame paths resolve against `image_dir` if
/// given, else the directory of the JSON file; a bare file name inside that
/// directory also matches. LDR images are linearized.
pub fn load_views(transforms: &Path, image_dir: Option<&Path>) -> Result<Vec<CameraView>> {
    let t = read_transforms(transforms)?;
    let base = transforms.parent().unwrap_or(Path::new("."));
    let mut views = Vec::with_capacity(t.frames.len());
    for (i, f) in t.frames.iter().enumerate() {
        let path = resolve_image(base, &f.file_path, image_dir)?;
        let img = if io::is_linear_image(&path) {
            io::read_linear(&path)?
        } else {
            linearize(&io::read_display(&path, crate::color::Transfer::Gamma22)?)
        };
        let (w, h) = img.dims();
        views.push(CameraView::new(t.camera(i, w, h), img)?);
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_projects_target_to_center() {
        let c = Camera::look_at(Vec3::new(1.0, 2.0, 3.0), Vec3::ZERO, Vec3::Y, 0.8, 64, 48).unwrap();
        let (u, v, z) = c.project(Vec3::ZERO);
        assert!((u - 32.0).abs() < 1e-9 && (v - 24.0).abs() < 1e-9);
        assert!((z - 14f64.sqrt()).abs() < 1e-9);
        assert!((c.center() - Vec3::new(1.0, 2.0, 3.0)).length() < 1e-12);
        // world up appears toward smaller v
        let (_, v_up, _) = c.project(Vec3::new(0.0, 0.1, 0.0));
        assert!(v_up < 24.0);
    }

    #[test]
    fn gl_round_trip() {
        let c = Camera::look_at(Vec3::new(-2.0, 0.5, 1.0), Vec3::new(0.0, 0.2, 0.0), Vec3::Y, 0.7, 32, 32).unwrap();
        let t = Transforms::from_cameras(&[("a".into(), c.clone())]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Transforms = serde_json::from_str(&json).unwrap();
        let d = back.camera(0, 32, 32);
        for i in 0..3 {
            for j in 0..3 {
                assert!((d.rotation.0[i][j] - c.rotation.0[i][j]).abs() < 1e-12);
            }
            assert!((d.translation[i] - c.translation[i]).abs() < 1e-12);
        }
        assert!((d.fx - c.fx).abs() < 1e-9);
        // OpenGL camera looks down its -z column
        let m = c.to_gl_c2w();
        let fwd = -Vec3::new(m[0][2], m[1][2], m[2][2]);
        let want = (Vec3::new(0.0, 0.2, 0.0) - c.center()).normalized();
        assert!((fwd - want).length() < 1e-12);
    }
}
