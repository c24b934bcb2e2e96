use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

use super::sh;

/// Gaussians in raw optimizer parameterization, structure-of-arrays.
///
/// Scales are stored as logs, opacities as logits, rotations as (w, x, y, z)
/// quaternions (normalized when used). SH coefficients are linear HDR radiance
/// laid out `[gaussian][k][channel]`. The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub degree: usize,
    pub positions: Vec<[f64; 3]>,
    pub log_scales: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub opacity_logits: Vec<f64>,
    pub sh: Vec<[f64; 3]>,
}

/// One gaussian in natural units, for building scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub position: Vec3,
    pub scale: [f64; 3],
    pub rotation: [f64; 4],
    pub opacity: f64,
    /// `[k][channel]`, length `(degree + 1)^2`.
    pub sh: Vec<[f64; 3]>,
}

impl Gaussian {
    /// Isotropic gaussian with constant radiance `rgb`.
    pub fn isotropic(position: Vec3, sigma: f64, opacity: f64, rgb: [f64; 3], degree: usize) -> Self {
        let mut sh = vec![[0.0; 3]; sh::coeff_count(degree)];
        sh[0] = rgb.map(sh::dc_from_radiance);
        Self {
            position,
            scale: [sigma; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity,
            sh,
        }
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GaussianScene {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > sh::MAX_DEGREE {
            return Err(Error::invalid(format!("SH degree {degree} exceeds {}", sh::MAX_DEGREE)));
        }
        Ok(Self {
            degree,
            positions: Vec::new(),
            log_scales: Vec::new(),
            rotations: Vec::new(),
            opacity_logits: Vec::new(),
            sh: Vec::new(),
        })
    }

    pub fn from_gaussians(degree: usize, gaussians: &[Gaussian]) -> Result<Self> {
        let mut s = Self::new(degree)?;
        for g in gaussians {
            s.push(g)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, g: &Gaussian) -> Result<()> {
        if g.sh.len() != self.coeffs_per_gaussian() {
            return Err(Error::invalid(format!(
                "gaussian has {} SH coefficients, scene expects {}",
                g.sh.len(),
                self.coeffs_per_gaussian()
            )));
        }
        if !(g.opacity > 0.0 && g.opacity < 1.0) || g.scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("gaussian needs opacity in (0, 1) and positive scales"));
        }
        self.positions.push(g.position.to_array());
        self.log_scales.push(g.scale.map(f64::ln));
        self.rotations.push(g.rotation);
        self.opacity_logits.push(logit(g.opacity));
        self.sh.extend_from_slice(&g.sh);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn coeffs_per_gaussian(&self) -> usize {
        sh::coeff_count(self.degree)
    }

    pub fn sh_of(&self, i: usize) -> &[[f64; 3]] {
        let k = self.coeffs_per_gaussian();
        &self.sh[i * k..(i + 1) * k]
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.opacity_logits[i])
    }

    pub fn scale(&self, i: usize) -> [f64; 3] {
        self.log_scales[i].map(f64::exp)
    }

    pub fn position(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.positions[i])
    }

    pub fn gaussian(&self, i: usize) -> Gaussian {
        Gaussian {
            position: self.position(i),
            scale: self.scale(i),
            rotation: self.rotations[i],
            opacity: self.opacity(i),
            sh: self.sh_of(i).to_vec(),
        }
    }

    /// Same shape, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            degree: self.degree,
            positions: vec![[0.0; 3]; self.len()],
            log_scales: vec![[0.0; 3]; self.len()],
            rotations: vec![[0.0; 4]; self.len()],
            opacity_logits: vec![0.0; self.len()],
            sh: vec![[0.0; 3]; self.sh.len()],
        }
    }

    /// Flat views of each parameter group, in a fixed order: positions,
    /// log-scales, rotations, opacity logits, SH DC, higher-order SH.
    pub fn groups_mut(&mut self) -> [Vec<&mut f64>; 6] {
        let k = sh::coeff_count(self.degree);
        let mut dc = Vec::new();
        let mut rest = Vec::new();
        for (j, c) in self.sh.iter_mut().enumerate() {
            if j % k == 0 {
                dc.extend(c.iter_mut());
            } else {
                rest.extend(c.iter_mut());
            }
        }
        [
            self.positions.iter_mut().flatten().collect(),
            self.log_scales.iter_mut().flatten().collect(),
            self.rotations.iter_mut().flatten().collect(),
            self.opacity_logits.iter_mut().collect(),
            dc,
            rest,
        ]
    }

    /// Copies of each parameter group, in `groups_mut` order.
    pub fn group_values(&self) -> [Vec<f64>; 6] {
        let mut c = self.clone();
        c.groups_mut().map(|g| g.into_iter().map(|v| *v).collect())
    }

    /// All parameters as one vector, in `groups_mut` order.
    pub fn flat(&self) -> Vec<f64> {
        let mut c = self.clone();
        c.groups_mut().into_iter().flatten().map(|v| *v).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for g in self.groups_mut() {
            for v in g {
                *v = *it.next().expect("flat parameter vector too short");
            }
        }
    }

    pub fn normalize_rotations(&mut self) {
        for q in &mut self.rotations {
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 && n.is_finite() {
                *q = q.map(|v| v / n);
            } else {
                *q = [1.0, 0.0, 0.0, 0.0];
            }
        }
    }

    /// Keeps the gaussians whose index passes `keep`.
    pub fn retain(&mut self, keep: &[bool]) {
        let k = self.coeffs_per_gaussian();
        keep_by(&mut self.positions, |i| keep[i]);
        keep_by(&mut self.log_scales, |i| keep[i]);
        keep_by(&mut self.rotations, |i| keep[i]);
        keep_by(&mut self.opacity_logits, |i| keep[i]);
        keep_by(&mut self.sh, |i| keep[i / k]);
    }

    /// Appends gaussian `i` of `src`, possibly from a different scene.
    pub fn push_from(&mut self, src: &GaussianScene, i: usize) {
        self.positions.push(src.positions[i]);
        self.log_scales.push(src.log_scales[i]);
        self.rotations.push(src.rotations[i]);
        self.opacity_logits.push(src.opacity_logits[i]);
        self.sh.extend_from_slice(src.sh_of(i));
    }

    pub fn check_finite(&self) -> Result<()> {
        let bad = self.flat().iter().any(|v| !v.is_finite());
        if bad {
            return Err(Error::invalid("scene has non-finite parameters"));
        }
        Ok(())
    }

    /// World-space covariance of gaussian `i`.
    pub fn covariance(&self, i: usize) -> Mat3 {
        let r = quat_to_mat(normalize_quat(self.rotations[i]).0);
        let s = self.scale(i);
        let m = Mat3::from_cols(r.col(0) * s[0], r.col(1) * s[1], r.col(2) * s[2]);
        m * m.transpose()
    }
}

fn keep_by<T>(v: &mut Vec<T>, keep: impl Fn(usize) -> bool) {
    let mut i = 0;
    v.retain(|_| {
        i += 1;
        keep(i - 1)
    });
}

/// Unit quaternion and the original norm.
pub fn normalize_quat(q: [f64; 4]) -> ([f64; 4], f64) {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        (q.map(|v| v / n), n)
    } else {
        ([1.0, 0.0, 0.0, 0.0], 1.0)
    }
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
pub fn quat_to_mat(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    Mat3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// Derivatives of `quat_to_mat` w.r.t. w, x, y, z.
pub(crate) fn quat_mat_partials(q: [f64; 4]) -> [Mat3; 4] {
    let [w, x, y, z] = q;
    [
        Mat3([[0.0, -2.0 * z, 2.0 * y], [2.0 * z, 0.0, -2.0 * x], [-2.0 * y, 2.0 * x, 0.0]]),
        Mat3([[0.0, 2.0 * y, 2.0 * z], [2.0 * y, -4.0 * x, -2.0 * w], [2.0 * z, 2.0 * w, -4.0 * x]]),
        Mat3([[-4.0 * y, 2.0 * x, 2.0 * w], [2.0 * x, 0.0, 2.0 * z], [-2.0 * w, 2.0 * z, -4.0 * y]]),
        Mat3([[-4.0 * z, -2.0 * w, 2.0 * x], [2.0 * w, -4.0 * z, 2.0 * y], [2.0 * x, 2.0 * y, 0.0]]),
    ]
}
