//! Tile-based EWA splatting with an analytic backward pass.
//!
//! Differences from the usual real-time rasterizer: no low-alpha skip and no
//! early ray termination, and the footprint cutoff sits far out in the tail
//! (`exp(-25)`), so the rendered image is smooth in every parameter except
//! at the 0.99 alpha clamp and the SH zero clamp.

use rayon::prelude::*;

use super::camera::Camera;
use super::scene::{normalize_quat, quat_mat_partials, quat_to_mat, GaussianScene};
use super::sh;
use crate::color::LinearImage;
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const ALPHA_MAX: f64 = 0.99;
/// Gaussian exponent beyond which a splat contributes nothing.
pub const POWER_CUTOFF: f64 = 25.0;
/// Screen-space low-pass added to every projected covariance.
pub const DILATION: f64 = 0.3;
pub const NEAR: f64 = 0.01;
const TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSettings {
    pub background: [f64; 3],
}

impl Default for RasterSettings {
    fn default() -> Self {
        Self { background: [0.0; 3] }
    }
}

#[derive(Debug, Clone)]
struct Splat {
    id: usize,
    depth: f64,
    mean: [f64; 2],
    /// Inverse screen covariance `[[a, b], [b, c]]`.
    conic: [f64; 3],
    color: [f64; 3],
    /// Channels whose SH value was clamped at zero.
    clamped: [bool; 3],
    opacity: f64,
    bbox: [usize; 4],
    p_cam: Vec3,
    jw: [[f64; 3]; 2],
}

/// Result of a forward pass; keeps what the backward pass needs.
pub struct Rasterization {
    pub width: usize,
    pub height: usize,
    /// Linear RGB, row-major.
    pub image: Vec<f64>,
    /// Gaussians behind the near plane.
    pub culled: usize,
    /// Gaussians with non-finite or non-positive-definite screen covariance.
    pub degenerate: usize,
    splats: Vec<Splat>,
    tiles: Vec<Vec<usize>>,
    tiles_x: usize,
    camera: Camera,
    settings: RasterSettings,
}

impl Rasterization {
    pub fn to_image(&self) -> LinearImage {
        let data = self.image.iter().map(|&v| v.max(0.0) as f32).collect();
        LinearImage::new(self.width, self.height, data).expect("rendered values are finite")
    }
}

fn project(scene: &GaussianScene, cam: &Camera, i: usize) -> Option<std::result::Result<Splat, ()>> {
    let mu = scene.position(i);
    let p = cam.to_camera(mu);
    if !(p.z > NEAR) {
        return None;
    }
    let (fx, fy) = (cam.fx, cam.fy);
    let (x, y, z) = (p.x, p.y, p.z);
    let j = [[fx / z, 0.0, -fx * x / (z * z)], [0.0, fy / z, -fy * y / (z * z)]];
    let w = &cam.rotation.0;
    let mut jw = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            jw[r][c] = (0..3).map(|k| j[r][k] * w[k][c]).sum();
        }
    }
    let sigma = scene.covariance(i).0;
    let mut cov = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += jw[r][a] * sigma[a][b] * jw[c][b];
                }
            }
            cov[r][c] = s;
        }
    }
    let (a, b, c) = (cov[0][0] + DILATION, cov[0][1], cov[1][1] + DILATION);
    let det = a * c - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return Some(Err(()));
    }
    let conic = [c / det, -b / det, a / det];
    let mid = 0.5 * (a + c);
    let lmax = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = (2.0 * POWER_CUTOFF * lmax).sqrt();
    let mean = [fx * x / z + cam.cx, fy * y / z + cam.cy];
    let lo = |m: f64, n: usize| ((m - radius - 0.5).ceil().max(0.0) as usize).min(n);
    let hi = |m: f64, n: usize| (((m + radius - 0.5).floor() + 1.0).max(0.0) as usize).min(n);
    let bbox = [
        lo(mean[0], cam.width),
        hi(mean[0], cam.width),
        lo(mean[1], cam.height),
        hi(mean[1], cam.height),
    ];
    let dir = (mu - cam.center()).normalized();
    let raw = sh::eval_raw(scene.sh_of(i), dir);
    Some(Ok(Splat {
        id: i,
        depth: z,
        mean,
        conic,
        color: raw.map(|v| v.max(0.0)),
        clamped: raw.map(|v| v <= 0.0),
        opacity: scene.opacity(i),
        bbox,
        p_cam: p,
        jw,
    }))
}

/// Projects, sorts, bins and composites `scene` as seen by `cam`.
pub fn rasterize(scene: &GaussianScene, cam: &Camera, settings: &RasterSettings) -> Result<Rasterization> {
    cam.validate()?;
    let projected: Vec<_> = (0..scene.len()).into_par_iter().map(|i| project(scene, cam, i)).collect();
    let mut culled = 0;
    let mut degenerate = 0;
    let mut splats = Vec::new();
    for p in projected {
        match p {
            None => culled += 1,
            Some(Err(())) => degenerate += 1,
            Some(Ok(s)) => {
                if s.bbox[0] < s.bbox[1] && s.bbox[2] < s.bbox[3] {
                    splats.push(s);
                }
            }
        }
    }
    if degenerate > 0 {
        log::warn!("skipped {degenerate} gaussians with degenerate screen covariance");
    }
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));

    let (w, h) = (cam.width, cam.height);
    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        for ty in s.bbox[2] / TILE..=(s.bbox[3] - 1) / TILE {
            for tx in s.bbox[0] / TILE..=(s.bbox[1] - 1) / TILE {
                tiles[ty * tiles_x + tx].push(k);
            }
        }
    }

    let bg = settings.background;
    let rendered: Vec<Vec<f64>> = tiles
        .par_iter()
        .enumerate()
        .map(|(t, list)| {
            let (x0, y0) = ((t % tiles_x) * TILE, (t / tiles_x) * TILE);
            let (x1, y1) = ((x0 + TILE).min(w), (y0 + TILE).min(h));
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0) * 3);
            for py in y0..y1 {
                for px in x0..x1 {
                    let mut c = [0.0; 3];
                    let mut tr = 1.0;
                    for &k in list {
                        if let Some((alpha, _)) = splat_alpha(&splats[k], px, py) {
                            for ch in 0..3 {
                                c[ch] += tr * alpha * splats[k].color[ch];
                            }
                            tr *= 1.0 - alpha;
                        }
                    }
                    for ch in 0..3 {
                        out.push(c[ch] + tr * bg[ch]);
                    }
                }
            }
            out
        })
        .collect();
    let mut image = vec![0.0; w * h * 3];
    for (t, buf) in rendered.iter().enumerate() {
        let (x0, y0) = ((t % tiles_x) * TILE, (t / tiles_x) * TILE);
        let x1 = (x0 + TILE).min(w);
        let row = (x1 - x0) * 3;
        for (r, chunk) in buf.chunks(row).enumerate() {
            let start = ((y0 + r) * w + x0) * 3;
            image[start..start + row].copy_from_slice(chunk);
        }
    }
    Ok(Rasterization {
        width: w,
        height: h,
        image,
        culled,
        degenerate,
        splats,
        tiles,
        tiles_x,
        camera: cam.clone(),
        settings: *settings,
    })
}

/// Alpha at the center of pixel `(px, py)` and the unclamped falloff factor.
fn splat_alpha(s: &Splat, px: usize, py: usize) -> Option<(f64, f64)> {
    if px < s.bbox[0] || px >= s.bbox[1] || py < s.bbox[2] || py >= s.bbox[3] {
        return None;
    }
    let dx = px as f64 + 0.5 - s.mean[0];
    let dy = py as f64 + 0.5 - s.mean[1];
    let power = 0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
    if power > POWER_CUTOFF {
        return None;
    }
    let g = (-power).exp();
    Some(((s.opacity * g).min(ALPHA_MAX), g))
}

#[derive(Debug, Clone, Copy, Default)]
struct ScreenGrad {
    mean: [f64; 2],
    conic: [f64; 3],
    color: [f64; 3],
    logit: f64,
}

impl ScreenGrad {
    fn add(&mut self, o: &ScreenGrad) {
        for k in 0..2 {
            self.mean[k] += o.mean[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.logit += o.logit;
    }
}

struct Contribution {
    list_pos: usize,
    alpha: f64,
    g: f64,
    transmittance: f64,
    dx: f64,
    dy: f64,
}

impl Rasterization {
    /// Gradient of a scalar loss w.r.t. every scene parameter, given the loss
    /// gradient w.r.t. each rendered value.
    pub fn backward(&self, scene: &GaussianScene, dl_dimage: &[f64]) -> Result<GaussianScene> {
        if dl_dimage.len() != self.image.len() {
            return Err(Error::invalid("image gradient has the wrong length"));
        }
        let (w, h) = (self.width, self.height);
        let bg = self.settings.background;
        let per_tile: Vec<Vec<ScreenGrad>> = self
            .tiles
            .par_iter()
            .enumerate()
            .map(|(t, list)| {
                let mut acc = vec![ScreenGrad::default(); list.len()];
                let (x0, y0) = ((t % self.tiles_x) * TILE, (t / self.tiles_x) * TILE);
                let (x1, y1) = ((x0 + TILE).min(w), (y0 + TILE).min(h));
                let mut contribs = Vec::new();
                for py in y0..y1 {
                    for px in x0..x1 {
                        let pix = (py * w + px) * 3;
                        let gpix = [dl_dimage[pix], dl_dimage[pix + 1], dl_dimage[pix + 2]];
                        if gpix == [0.0; 3] {
                            continue;
                        }
                        contribs.clear();
                        let mut tr = 1.0;
                        for (pos, &k) in list.iter().enumerate() {
                            let s = &self.splats[k];
                            if let Some((alpha, g)) = splat_alpha(s, px, py) {
                                contribs.push(Contribution {
                                    list_pos: pos,
                                    alpha,
                                    g,
                                    transmittance: tr,
                                    dx: px as f64 + 0.5 - s.mean[0],
                                    dy: py as f64 + 0.5 - s.mean[1],
                                });
                                tr *= 1.0 - alpha;
                            }
                        }
                        // light arriving from behind each splat
                        let mut behind = bg.map(|b| b * tr);
                        for c in contribs.iter().rev() {
                            let s = &self.splats[list[c.list_pos]];
                            let a = &mut acc[c.list_pos];
                            let ta = c.transmittance * c.alpha;
                            let mut dl_dalpha = 0.0;
                            for ch in 0..3 {
                                a.color[ch] += gpix[ch] * ta;
                                dl_dalpha += gpix[ch] * (c.transmittance * s.color[ch] - behind[ch] / (1.0 - c.alpha));
                                behind[ch] += ta * s.color[ch];
                            }
                            if s.opacity * c.g >= ALPHA_MAX {
                                continue;
                            }
                            a.logit += dl_dalpha * c.g * s.opacity * (1.0 - s.opacity);
                            let dl_dpower = -dl_dalpha * c.alpha;
                            let [ca, cb, cc] = s.conic;
                            a.mean[0] += dl_dpower * -(ca * c.dx + cb * c.dy);
                            a.mean[1] += dl_dpower * -(cb * c.dx + cc * c.dy);
                            a.conic[0] += dl_dpower * 0.5 * c.dx * c.dx;
                            a.conic[1] += dl_dpower * c.dx * c.dy;
                            a.conic[2] += dl_dpower * 0.5 * c.dy * c.dy;
                        }
                    }
                }
                acc
            })
            .collect();

        // fixed tile order keeps the sum independent of scheduling
        let mut screen = vec![ScreenGrad::default(); self.splats.len()];
        for (list, acc) in self.tiles.iter().zip(&per_tile) {
            for (&k, g) in list.iter().zip(acc) {
                screen[k].add(g);
            }
        }

        let cam = &self.camera;
        let center = cam.center();
        let per_splat: Vec<(usize, Param)> = self
            .splats
            .par_iter()
            .zip(screen.par_iter())
            .map(|(s, g)| (s.id, splat_param_grad(scene, cam, center, s, g)))
            .collect();

        let mut grads = scene.zeros_like();
        let kc = scene.coeffs_per_gaussian();
        for (id, p) in per_splat {
            grads.positions[id] = p.position;
            grads.log_scales[id] = p.log_scale;
            grads.rotations[id] = p.rotation;
            grads.opacity_logits[id] = p.logit;
            grads.sh[id * kc..(id + 1) * kc].copy_from_slice(&p.sh);
        }
        Ok(grads)
    }
}

struct Param {
    position: [f64; 3],
    log_scale: [f64; 3],
    rotation: [f64; 4],
    logit: f64,
    sh: Vec<[f64; 3]>,
}

fn splat_param_grad(scene: &GaussianScene, cam: &Camera, center: Vec3, s: &Splat, g: &ScreenGrad) -> Param {
    let i = s.id;
    // conic = inverse(cov2d): dL/dcov = -K dL/dK K with the off-diagonal split
    let k = [[s.conic[0], s.conic[1]], [s.conic[1], s.conic[2]]];
    let gk = [[g.conic[0], 0.5 * g.conic[1]], [0.5 * g.conic[1], g.conic[2]]];
    let gcov = mat2_neg_sandwich(&k, &gk);

    let sigma = scene.covariance(i).0;
    let t = s.jw;
    // dL/dSigma = T^T Gcov T
    let mut gsigma = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut v = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    v += t[r][a] * gcov[r][c] * t[c][b];
                }
            }
            gsigma[a][b] = v;
        }
    }
    // dL/dT = 2 Gcov T Sigma, then dL/dJ = dL/dT W^T
    let mut gt = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            let mut v = 0.0;
            for q in 0..2 {
                for m in 0..3 {
                    v += gcov[r][q] * t[q][m] * sigma[m][c];
                }
            }
            gt[r][c] = 2.0 * v;
        }
    }
    let wm = &cam.rotation.0;
    let mut gj = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            gj[r][c] = (0..3).map(|m| gt[r][m] * wm[c][m]).sum();
        }
    }
    let (fx, fy) = (cam.fx, cam.fy);
    let Vec3 { x, y, z } = s.p_cam;
    let (z2, z3) = (z * z, z * z * z);
    let [gmx, gmy] = g.mean;
    let gp = Vec3::new(
        gj[0][2] * (-fx / z2) + gmx * fx / z,
        gj[1][2] * (-fy / z2) + gmy * fy / z,
        gj[0][0] * (-fx / z2)
            + gj[0][2] * (2.0 * fx * x / z3)
            + gj[1][1] * (-fy / z2)
            + gj[1][2] * (2.0 * fy * y / z3)
            + gmx * (-fx * x / z2)
            + gmy * (-fy * y / z2),
    );
    let mut gmu = cam.rotation.transpose().mul_vec(gp);

    // Sigma = M M^T with M = R diag(s)
    let (qn, qnorm) = normalize_quat(scene.rotations[i]);
    let rot = quat_to_mat(qn).0;
    let sc = scene.scale(i);
    let mut gr = [[0.0; 3]; 3];
    let mut log_scale = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            // dL/dM = 2 Gsigma M (Gsigma symmetric)
            let gm: f64 = 2.0 * (0..3).map(|m| gsigma[a][m] * rot[m][b] * sc[b]).sum::<f64>();
            gr[a][b] = gm * sc[b];
            log_scale[b] += gm * rot[a][b] * sc[b];
        }
    }
    let partials = quat_mat_partials(qn);
    let mut gqn = [0.0; 4];
    for (kq, p) in partials.iter().enumerate() {
        gqn[kq] = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| gr[a][b] * p.0[a][b]).sum();
    }
    let dot: f64 = (0..4).map(|m| gqn[m] * qn[m]).sum();
    let rotation = [0, 1, 2, 3].map(|m| (gqn[m] - qn[m] * dot) / qnorm);

    // SH color along the normalized view direction
    let coeffs = scene.sh_of(i);
    let v = scene.position(i) - center;
    let vlen = v.length();
    let d = v * (1.0 / vlen);
    let basis = sh::basis(scene.degree, d);
    let bgrad = sh::basis_grad(scene.degree, d);
    let gc: [f64; 3] = [0, 1, 2].map(|ch| if s.clamped[ch] { 0.0 } else { g.color[ch] });
    let mut shg = vec![[0.0; 3]; coeffs.len()];
    let mut gd = [0.0; 3];
    for (kk, c) in coeffs.iter().enumerate() {
        for ch in 0..3 {
            shg[kk][ch] = gc[ch] * basis[kk];
            for ax in 0..3 {
                gd[ax] += gc[ch] * c[ch] * bgrad[kk][ax];
            }
        }
    }
    let gd = Vec3::from_array(gd);
    gmu += (gd - d * d.dot(gd)) * (1.0 / vlen);

    Param {
        position: gmu.to_array(),
        log_scale,
        rotation,
        logit: g.logit,
        sh: shg,
    }
}

/// `-K G K` for 2x2 matrices.
fn mat2_neg_sandwich(k: &[[f64; 2]; 2], g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut kg = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            kg[r][c] = k[r][0] * g[0][c] + k[r][1] * g[1][c];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = -(kg[r][0] * k[0][c] + kg[r][1] * k[1][c]);
        }
    }
    out
}

/// Forward pass only, as an image.
pub fn render(scene: &GaussianScene, cam: &Camera) -> Result<LinearImage> {
    Ok(rasterize(scene, cam, &RasterSettings::default())?.to_image())
}
