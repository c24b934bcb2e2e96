//! Image containers and per-pixel color arithmetic.

mod exposure;
mod transfer;

pub use exposure::{
    apply_exposure, auto_expose, luminance, saturation_mask, AutoExposure, ExposureValue,
    LogLumaStatistic, SaturationMask, DEFAULT_KEY, DEFAULT_SAT_HI, DEFAULT_SAT_LO, REC709,
};
pub use transfer::{Transfer, GAMMA};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Linear, unbounded RGB radiance. Row-major, three interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl LinearImage {
    /// Validates that every sample is finite and non-negative.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "linear sample {i} is {} (must be finite and >= 0)",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let rgb = rgb.map(sanitize);
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds an image from a per-pixel closure. Non-finite or negative results are clamped to 0.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3] + Sync) -> Self {
        let mut data = vec![0.0f32; width * height * 3];
        data.par_chunks_mut(width.max(1) * 3)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..width {
                    let rgb = f(x, y);
                    for c in 0..3 {
                        row[x * 3 + c] = sanitize(rgb[c]);
                    }
                }
            });
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[i + c] = sanitize(rgb[c]);
        }
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Multiplies every sample by a non-negative factor.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| sanitize(v * factor)).collect(),
        }
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub(crate) fn ensure_same_dims(&self, other: &LinearImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }
}

/// Display-referred RGB in `[0, 1]` tagged with the transfer curve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
    transfer: Transfer,
}

impl DisplayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>, transfer: Transfer) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::invalid(format!(
                "display sample {i} is {} (must lie in [0, 1])",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            transfer,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3], transfer: Transfer) -> Self {
        let rgb = rgb.map(|v| sanitize(v).min(1.0));
        Self {
            width,
            height,
            data: (0..width * height).flat_map(|_| rgb).collect(),
            transfer,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn transfer(&self) -> Transfer {
        self.transfer
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[i + c] = sanitize(rgb[c]).min(1.0);
        }
    }

    /// Same samples under a different tag.
    pub fn with_transfer(mut self, transfer: Transfer) -> Self {
        self.transfer = transfer;
        self
    }
}

/// Inverts the image's transfer curve per sample.
pub fn linearize(img: &DisplayImage) -> LinearImage {
    let t = img.transfer;
    LinearImage {
        width: img.width,
        height: img.height,
        data: img.data.par_iter().map(|&v| t.decode(v as f64) as f32).collect(),
    }
}

/// Clamps to `[0, 1]` and applies the forward transfer curve.
pub fn delinearize(img: &LinearImage, transfer: Transfer) -> DisplayImage {
    DisplayImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .par_iter()
            .map(|&v| transfer.encode(v as f64) as f32)
            .collect(),
        transfer,
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height).and_then(|n| n.checked_mul(3)) != Some(len) {
        return Err(Error::invalid(format!(
            "{width}x{height}x3 image needs {} samples, got {len}",
            width.saturating_mul(height).saturating_mul(3)
        )));
    }
    Ok(())
}

#[inline]
fn sanitize(v: f32) -> f32 {
    if v.is_finite() && v > 0.0 {
        v
    } else {
        0.0
    }
}
