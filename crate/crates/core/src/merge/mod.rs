//! Debevec-style fusion of an exposure stack into linear radiance.
//!
//! Each entry is linearized, divided by its exposure factor, and averaged with
//! hat weights `w = 1 - 2|z - 0.5|`. Samples of the reference `I_0` inside the
//! unit band get weight 1, keeping its unsaturated pixels intact.

mod audit;

pub use audit::{audit_hdr, AuditConfig, AuditVerdict};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::ExposureStack;
use crate::color::{DisplayImage, ExposureValue, LinearImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightProfile {
    /// Display band `[lo, hi]` where reference samples get weight 1.
    pub lo: f32,
    pub hi: f32,
}

impl Default for WeightProfile {
    fn default() -> Self {
        Self { lo: 0.2, hi: 0.8 }
    }
}

impl WeightProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo && self.lo < self.hi && self.hi <= 1.0) {
            return Err(Error::invalid(format!(
                "weight band needs 0 <= lo < hi <= 1, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Merge weight of display value `z`.
pub fn weight(z: f32, is_reference: bool, profile: &WeightProfile) -> f32 {
    if is_reference && z >= profile.lo && z <= profile.hi {
        1.0
    } else {
        (-2.0 * (z - 0.5).abs() + 1.0).max(0.0)
    }
}

pub fn merge(stack: &ExposureStack, profile: &WeightProfile) -> Result<LinearImage> {
    let entries: Vec<(&DisplayImage, ExposureValue)> =
        stack.entries().iter().map(|e| (&e.image, e.ev)).collect();
    merge_entries(&entries, stack.reference_index(), profile)
}

/// Merge over explicit `(image, ev)` pairs sorted by ascending ev. Unlike
/// [`ExposureStack`], the reference entry need not sit at ev 0.
///
/// A sample with zero total weight (saturated in every entry) falls back to an
/// extreme entry: the darkest one if the reference sample is `>= 0.5`, else the brightest.
pub fn merge_entries(
    entries: &[(&DisplayImage, ExposureValue)],
    reference: usize,
    profile: &WeightProfile,
) -> Result<LinearImage> {
    profile.validate()?;
    if entries.is_empty() || reference >= entries.len() {
        return Err(Error::invalid("merge needs at least one entry and a valid reference"));
    }
    let dims = entries[0].0.dims();
    for (img, _) in entries {
        if img.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: img.dims(),
            });
        }
    }
    if entries.windows(2).any(|w| w[0].1 .0 >= w[1].1 .0) {
        return Err(Error::invalid("merge entries must have strictly increasing ev"));
    }

    let inv_factor: Vec<f64> = entries.iter().map(|(_, ev)| 1.0 / ev.factor()).collect();
    let last = entries.len() - 1;
    let n = dims.0 * dims.1 * 3;
    let mut out = vec![0.0f32; n];
    out.par_chunks_mut(dims.0 * 3)
        .enumerate()
        .for_each(|(row, chunk)| {
            let base = row * dims.0 * 3;
            for (k, o) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let (mut num, mut den) = (0.0f64, 0.0f64);
                for (j, (img, _)) in entries.iter().enumerate() {
                    let z = img.data()[i];
                    let w = weight(z, j == reference, profile) as f64;
                    if w > 0.0 {
                        num += w * img.transfer().decode(z as f64) * inv_factor[j];
                        den += w;
                    }
                }
                let v = if den > 0.0 {
                    num / den
                } else {
                    let j = if entries[reference].0.data()[i] >= 0.5 { 0 } else { last };
                    let (img, _) = entries[j];
                    img.transfer().decode(img.data()[i] as f64) * inv_factor[j]
                };
                *o = v as f32;
            }
        });
    LinearImage::new(dims.0, dims.1, out)
}
