//! Detection of clipped HDR captures: large flat regions at the channel maximum.

use serde::{Deserialize, Serialize};

use crate::color::LinearImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Samples within this fraction of the channel maximum count as peak.
    pub peak_fraction: f32,
    /// Smallest 4-connected plateau that flags the image.
    pub min_pixels: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            peak_fraction: 0.005,
            min_pixels: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub saturated: bool,
    pub channel_max: [f32; 3],
    /// Peak-plateau samples per channel.
    pub plateau_pixels: [usize; 3],
    pub largest_plateau: usize,
}

/// Flags `img` when some channel has at least `min_pixels` 4-connected pixels
/// that are within `peak_fraction` of that channel's maximum and have zero
/// gradient to all in-bounds neighbours. A constant image is one big plateau.
pub fn audit_hdr(img: &LinearImage, cfg: &AuditConfig) -> AuditVerdict {
    let (w, h) = img.dims();
    let mut verdict = AuditVerdict {
        saturated: false,
        channel_max: [0.0; 3],
        plateau_pixels: [0; 3],
        largest_plateau: 0,
    };
    if w == 0 || h == 0 {
        return verdict;
    }
    let data = img.data();
    for c in 0..3 {
        let at = |x: usize, y: usize| data[(y * w + x) * 3 + c];
        let max = (0..w * h).map(|i| data[i * 3 + c]).fold(0.0f32, f32::max);
        verdict.channel_max[c] = max;
        if max <= 0.0 {
            continue;
        }
        let floor = max * (1.0 - cfg.peak_fraction);
        let flat_tol = max * 1e-6;
        let mut plateau = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let v = at(x, y);
                if v < floor {
                    continue;
                }
                let flat = neighbours(x, y, w, h).all(|(nx, ny)| (at(nx, ny) - v).abs() <= flat_tol);
                plateau[y * w + x] = flat;
            }
        }
        verdict.plateau_pixels[c] = plateau.iter().filter(|&&p| p).count();
        verdict.largest_plateau = verdict.largest_plateau.max(largest_component(&plateau, w, h));
    }
    verdict.saturated = verdict.largest_plateau >= cfg.min_pixels.max(1);
    verdict
}

fn neighbours(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let cands = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    cands.into_iter().filter(move |&(nx, ny)| nx < w && ny < h)
}

fn largest_component(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut best = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for (nx, ny) in neighbours(i % w, i / w, w, h) {
                let j = ny * w + nx;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        best = best.max(size);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_gradient_is_clean() {
        let img = LinearImage::from_fn(64, 64, |x, y| [x as f32 * 0.1 + y as f32 * 0.01 + 0.1; 3]);
        let v = audit_hdr(&img, &AuditConfig::default());
        assert!(!v.saturated, "{v:?}");
        let ramp = LinearImage::from_fn(64, 64, |x, _| [x as f32; 3]);
        assert!(!audit_hdr(&ramp, &AuditConfig::default()).saturated);
    }

    #[test]
    fn clipped_patch_is_flagged() {
        let mut img = LinearImage::from_fn(64, 64, |x, y| [(x + y) as f32 * 0.05; 3]);
        for y in 20..30 {
            for x in 30..40 {
                img.set_pixel(x, y, [100.0; 3]);
            }
        }
        let v = audit_hdr(&img, &AuditConfig::default());
        assert!(v.saturated);
        // the 8x8 interior has all neighbours equal
        assert_eq!(v.largest_plateau, 64);
    }

    #[test]
    fn constant_image_is_flagged() {
        let v = audit_hdr(&LinearImage::filled(8, 8, [3.0; 3]), &AuditConfig::default());
        assert!(v.saturated);
        assert_eq!(v.largest_plateau, 64);
    }

    #[test]
    fn black_image_is_not_flagged() {
        assert!(!audit_hdr(&LinearImage::zeros(8, 8), &AuditConfig::default()).saturated);
    }
}
