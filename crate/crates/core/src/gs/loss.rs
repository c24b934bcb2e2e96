//! Training loss: L1 on linear HDR plus (1 - SSIM) on gamma-2.2 display values.

use crate::color::GAMMA;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;
/// Floor for the display-gamma derivative, which is unbounded at zero.
const GAMMA_FLOOR: f64 = 1e-4;

fn kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Same-size separable Gaussian blur of one channel with zero padding. The
/// kernel is symmetric, so this operator is its own adjoint.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as isize + i as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    s += kv * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    s += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Mean SSIM over all pixels and channels of interleaved RGB images, and its
/// gradient w.r.t. `x`.
pub fn ssim_with_grad(x: &[f64], y: &[f64], w: usize, h: usize) -> (f64, Vec<f64>) {
    let k = kernel();
    let n = w * h;
    let mut total = 0.0;
    let mut grad = vec![0.0; n * 3];
    for ch in 0..3 {
        let xs: Vec<f64> = (0..n).map(|i| x[i * 3 + ch]).collect();
        let ys: Vec<f64> = (0..n).map(|i| y[i * 3 + ch]).collect();
        let sq = |v: &[f64]| v.iter().map(|a| a * a).collect::<Vec<_>>();
        let mx = blur(&xs, w, h, &k);
        let my = blur(&ys, w, h, &k);
        let mxx = blur(&sq(&xs), w, h, &k);
        let myy = blur(&sq(&ys), w, h, &k);
        let mxy = blur(&xs.iter().zip(&ys).map(|(a, b)| a * b).collect::<Vec<_>>(), w, h, &k);
        let mut d_mu = vec![0.0; n];
        let mut d_m2 = vec![0.0; n];
        let mut d_mxy = vec![0.0; n];
        let scale = 1.0 / (3 * n) as f64;
        for i in 0..n {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            let a1 = 2.0 * ux * uy + C1;
            let a2 = 2.0 * cxy + C2;
            let b1 = ux * ux + uy * uy + C1;
            let b2 = vx + vy + C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            d_mu[i] = scale * ((2.0 * uy * a2 - 2.0 * uy * a1) / (b1 * b2) - s * (2.0 * ux / b1 - 2.0 * ux / b2));
            d_m2[i] = scale * (-s / b2);
            d_mxy[i] = scale * (2.0 * a1 / (b1 * b2));
        }
        let g_mu = blur(&d_mu, w, h, &k);
        let g_m2 = blur(&d_m2, w, h, &k);
        let g_mxy = blur(&d_mxy, w, h, &k);
        for i in 0..n {
            grad[i * 3 + ch] = g_mu[i] + 2.0 * xs[i] * g_m2[i] + ys[i] * g_mxy[i];
        }
    }
    (total / (3 * n) as f64, grad)
}

/// Gamma-2.2 display value of a linear sample, and its derivative (zero where clamped).
pub fn display(v: f64) -> (f64, f64) {
    if v <= 0.0 {
        (0.0, 0.0)
    } else if v >= 1.0 {
        (1.0, 0.0)
    } else {
        let e = 1.0 / GAMMA;
        (v.powf(e), e * v.max(GAMMA_FLOOR).powf(e - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub l1: f64,
    pub ssim: f64,
}

/// `(1 - lambda) * L1(render, target) + lambda * (1 - SSIM(display(render), display(target)))`
/// and its gradient w.r.t. the render.
pub fn loss_with_grad(render: &[f64], target: &[f64], w: usize, h: usize, lambda: f64) -> (LossParts, Vec<f64>) {
    let n = render.len() as f64;
    let mut grad = vec![0.0; render.len()];
    let mut l1 = 0.0;
    for (i, (r, t)) in render.iter().zip(target).enumerate() {
        let d = r - t;
        l1 += d.abs();
        grad[i] = (1.0 - lambda) * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 } / n;
    }
    l1 /= n;
    let mut ssim = 1.0;
    if lambda > 0.0 {
        let (dr, ddr): (Vec<f64>, Vec<f64>) = render.iter().map(|&v| display(v)).unzip();
        let dt: Vec<f64> = target.iter().map(|&v| display(v).0).collect();
        let (s, gs) = ssim_with_grad(&dr, &dt, w, h);
        ssim = s;
        for i in 0..grad.len() {
            grad[i] -= lambda * gs[i] * ddr[i];
        }
    }
    let total = (1.0 - lambda) * l1 + lambda * (1.0 - ssim);
    (LossParts { total, l1, ssim }, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ssim_of_identical_images_is_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..16 * 12 * 3).map(|_| rng.random()).collect();
        let (s, g) = ssim_with_grad(&x, &x, 16, 12);
        assert!((s - 1.0).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (w, h) = (13, 9);
        let x: Vec<f64> = (0..w * h * 3).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..w * h * 3).map(|_| rng.random()).collect();
        let (_, g) = ssim_with_grad(&x, &y, w, h);
        for k in (0..x.len()).step_by(7) {
            let mut p = x.clone();
            p[k] += 1e-6;
            let sp = ssim_with_grad(&p, &y, w, h).0;
            p[k] -= 2e-6;
            let sm = ssim_with_grad(&p, &y, w, h).0;
            let fd = (sp - sm) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6 * fd.abs().max(1e-3), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (12, 12);
        let r: Vec<f64> = (0..w * h * 3).map(|_| rng.random_range(0.05..0.95)).collect();
        let t: Vec<f64> = r.iter().map(|v| v + if rng.random::<bool>() { 0.1 } else { -0.1 }).collect();
        let (_, g) = loss_with_grad(&r, &t, w, h, 0.2);
        for k in (0..r.len()).step_by(5) {
            let mut p = r.clone();
            p[k] += 1e-6;
            let lp = loss_with_grad(&p, &t, w, h, 0.2).0.total;
            p[k] -= 2e-6;
            let lm = loss_with_grad(&p, &t, w, h, 0.2).0.total;
            let fd = (lp - lm) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-5 * fd.abs().max(1e-3));
        }
    }
}
