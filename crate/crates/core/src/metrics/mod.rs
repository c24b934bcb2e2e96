//! Image comparison metrics for HDR predictions and renders.

pub mod pu21;

use serde::{Deserialize, Serialize};

use crate::color::{LinearImage, Transfer};
use crate::error::Result;

/// PSNR reported for identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Space in which MSE and PSNR are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Linear,
    /// Gamma 2.2 display values after clamping to `[0, 1]`.
    #[default]
    Display,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub image: LinearImage,
    pub scale: f64,
    /// The mid-tone mask was empty or degenerate and medians were used instead.
    pub fallback: bool,
}

/// Scales `pred` so its mean over `gt`'s mid-tone samples (display value in
/// `[0.2, 0.8]`) matches `gt`.
pub fn align_exposure(pred: &LinearImage, gt: &LinearImage) -> Result<Alignment> {
    pred.ensure_same_dims(gt)?;
    let (mut sp, mut sg, mut n) = (0.0f64, 0.0f64, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let z = Transfer::Gamma22.encode(g as f64);
        if (0.2..=0.8).contains(&z) {
            sp += p as f64;
            sg += g as f64;
            n += 1;
        }
    }
    let (scale, fallback) = if n > 0 && sp > 0.0 && sg > 0.0 {
        (sg / sp, false)
    } else {
        let (mp, mg) = (median(pred.data()), median(gt.data()));
        if mp > 0.0 && mg > 0.0 {
            (mg / mp, true)
        } else if pred.mean() > 0.0 {
            (gt.mean() / pred.mean(), true)
        } else {
            (1.0, true)
        }
    };
    Ok(Alignment {
        image: pred.scaled(scale as f32),
        scale,
        fallback,
    })
}

fn median(v: &[f32]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s: Vec<f32> = v.to_vec();
    s.sort_by(f32::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        0.5 * (s[n / 2 - 1] as f64 + s[n / 2] as f64)
    }
}

fn to_domain(v: f32, domain: Domain) -> f64 {
    match domain {
        Domain::Linear => v as f64,
        Domain::Display => Transfer::Gamma22.encode(v as f64),
    }
}

pub fn mse(pred: &LinearImage, gt: &LinearImage, domain: Domain) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| (to_domain(p, domain) - to_domain(g, domain)).powi(2))
        .sum::<f64>()
        / n)
}

/// PSNR from an MSE and peak, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

/// Peak 1.0 in both domains.
pub fn psnr(pred: &LinearImage, gt: &LinearImage, domain: Domain) -> Result<f64> {
    Ok(psnr_from_mse(mse(pred, gt, domain)?, 1.0))
}

/// Mean per-pixel angle between RGB vectors, in degrees. Pixels where either
/// vector is zero contribute 0.
pub fn angular_error(pred: &LinearImage, gt: &LinearImage) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let n = pred.pixel_count().max(1) as f64;
    let total: f64 = pred
        .pixels()
        .zip(gt.pixels())
        .map(|(p, g)| {
            let p = p.map(|v| v as f64);
            let g = g.map(|v| v as f64);
            let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let ng = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if np == 0.0 || ng == 0.0 {
                return 0.0;
            }
            let cos = (p[0] * g[0] + p[1] * g[1] + p[2] * g[2]) / (np * ng);
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .sum();
    Ok(total / n)
}

/// Per-channel PU21 encoding of `value * luminance_scale` cd/m^2.
pub fn pu21_encode(img: &LinearImage, luminance_scale: f64) -> Vec<f64> {
    img.data()
        .iter()
        .map(|&v| pu21::encode_luminance(v as f64 * luminance_scale))
        .collect()
}

/// PSNR in PU21 space with the peak at 10000 cd/m^2.
pub fn pu21_psnr(pred: &LinearImage, gt: &LinearImage, luminance_scale: f64) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let a = pu21_encode(pred, luminance_scale);
    let b = pu21_encode(gt, luminance_scale);
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64;
    Ok(psnr_from_mse(mse, pu21::peak()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub align: bool,
    pub domain: Domain,
    pub luminance_scale: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            align: true,
            domain: Domain::Display,
            luminance_scale: pu21::DEFAULT_LUMINANCE_SCALE,
        }
    }
}

/// Metric bundle for one prediction. Fields for external perceptual models are
/// reserved so their values can be merged into the same document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelightReport {
    pub schema_version: u32,
    pub domain: Domain,
    pub mse: f64,
    pub psnr: f64,
    pub angular_error: f64,
    pub pu21_psnr: f64,
    pub alignment_scale: f64,
    pub alignment_fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hdr_vdp3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pu21_piqe: Option<f64>,
}

impl RelightReport {
    /// Metrics of `pred` against `gt` with an already-decided alignment.
    pub fn from_images(
        pred: &LinearImage,
        gt: &LinearImage,
        opts: &CompareOptions,
        alignment_scale: f64,
        alignment_fallback: bool,
    ) -> Result<Self> {
        let m = mse(pred, gt, opts.domain)?;
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            domain: opts.domain,
            mse: m,
            psnr: psnr_from_mse(m, 1.0),
            angular_error: angular_error(pred, gt)?,
            pu21_psnr: pu21_psnr(pred, gt, opts.luminance_scale)?,
            alignment_scale,
            alignment_fallback,
            hdr_vdp3: None,
            pu21_piqe: None,
        })
    }
}

/// Optionally aligns `pred` to `gt`, then computes every metric.
pub fn compare(pred: &LinearImage, gt: &LinearImage, opts: &CompareOptions) -> Result<RelightReport> {
    if opts.align {
        let a = align_exposure(pred, gt)?;
        RelightReport::from_images(&a.image, gt, opts, a.scale, a.fallback)
    } else {
        RelightReport::from_images(pred, gt, opts, 1.0, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64, lo: f32, hi: f32) -> LinearImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        LinearImage::new(16, 16, (0..768).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn alignment_examples() {
        let gt = random(1, 0.01, 0.6);
        let a = align_exposure(&gt.scaled(2.0), &gt).unwrap();
        assert!((a.scale - 0.5).abs() < 1e-6);
        assert!(!a.fallback);
        for (x, y) in a.image.data().iter().zip(gt.data()) {
            assert!((x - y).abs() <= 1e-6 * y.max(1.0));
        }
        assert!((align_exposure(&gt, &gt).unwrap().scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alignment_ignores_replaced_highlights() {
        let mut gt = random(2, 0.01, 0.6);
        gt.set_pixel(3, 3, [50.0, 40.0, 60.0]);
        let mut pred = gt.clone();
        pred.set_pixel(3, 3, [1.0, 1.0, 1.0]);
        let a = align_exposure(&pred, &gt).unwrap();
        for i in 0..gt.data().len() {
            let z = Transfer::Gamma22.encode(gt.data()[i] as f64);
            if (0.2..=0.8).contains(&z) {
                assert!((a.image.data()[i] - gt.data()[i]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn alignment_falls_back_to_medians() {
        let gt = LinearImage::filled(4, 4, [50.0; 3]);
        let a = align_exposure(&LinearImage::filled(4, 4, [5.0; 3]), &gt).unwrap();
        assert!(a.fallback);
        assert!((a.scale - 10.0).abs() < 1e-9);
    }

    #[test]
    fn mse_psnr_examples() {
        let gt = random(3, 0.0, 0.5);
        assert_eq!(mse(&gt, &gt, Domain::Display).unwrap(), 0.0);
        assert_eq!(psnr(&gt, &gt, Domain::Display).unwrap(), PSNR_CAP_DB);
        let a = LinearImage::filled(4, 4, [0.2; 3]);
        let b = LinearImage::filled(4, 4, [0.3; 3]);
        assert!((mse(&b, &a, Domain::Linear).unwrap() - 0.01).abs() < 1e-8);
        let checker = LinearImage::from_fn(4, 4, |x, y| [((x + y) % 2) as f32; 3]);
        let inverse = LinearImage::from_fn(4, 4, |x, y| [((x + y + 1) % 2) as f32; 3]);
        assert_eq!(mse(&checker, &inverse, Domain::Display).unwrap(), 1.0);
        assert_eq!(psnr(&checker, &inverse, Domain::Display).unwrap(), 0.0);
    }

    #[test]
    fn angular_examples() {
        let gt = random(4, 0.1, 2.0);
        assert!(angular_error(&gt, &gt).unwrap() < 1e-3);
        assert!(angular_error(&gt.scaled(3.7), &gt).unwrap() < 1e-3);
        let r = LinearImage::filled(3, 3, [1.0, 0.0, 0.0]);
        let g = LinearImage::filled(3, 3, [0.0, 1.0, 0.0]);
        assert!((angular_error(&g, &r).unwrap() - 90.0).abs() < 1e-9);
        assert_eq!(angular_error(&LinearImage::zeros(3, 3), &r).unwrap(), 0.0);
    }

    #[test]
    fn pu21_psnr_examples() {
        let gray = LinearImage::filled(8, 8, [0.18; 3]);
        assert_eq!(pu21_psnr(&gray, &gray, 100.0).unwrap(), PSNR_CAP_DB);
        let black = LinearImage::zeros(8, 8);
        assert_eq!(pu21_psnr(&black, &black, 100.0).unwrap(), PSNR_CAP_DB);
        let mut prev = f64::INFINITY;
        for k in [1.5f32, 2.0, 4.0, 8.0] {
            let p = pu21_psnr(&gray.scaled(k), &gray, 100.0).unwrap();
            assert!(p.is_finite() && p > 0.0 && p < prev, "{k}: {p}");
            prev = p;
        }
    }

    #[test]
    fn pu21_scale_identity() {
        let img = random(5, 0.0, 4.0);
        assert_eq!(pu21_encode(&img, 200.0), pu21_encode(&img.scaled(2.0), 100.0));
    }

    #[test]
    fn report_serializes_without_reserved_fields() {
        let gt = random(6, 0.1, 0.5);
        let r = compare(&gt.scaled(2.0), &gt, &CompareOptions::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"schema_version\":1"));
        assert!(!json.contains("hdr_vdp3"));
        let back: RelightReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
