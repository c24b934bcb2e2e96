use serde::{Deserialize, Serialize};

use super::{DisplayImage, LinearImage};
use crate::error::{Error, Result};

/// Rec. 709 luminance weights.
pub const REC709: [f32; 3] = [0.2126, 0.7152, 0.0722];

/// Target log-average luminance for auto exposure.
pub const DEFAULT_KEY: f64 = 0.17;

/// One 8-bit code value inside either end of the display range.
pub const DEFAULT_SAT_LO: f32 = 1.0 / 255.0;
pub const DEFAULT_SAT_HI: f32 = 254.0 / 255.0;

const LOG_EPSILON: f64 = 1e-6;

/// Exposure offset in stops; applying it scales radiance by `2^ev`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExposureValue(pub f64);

impl ExposureValue {
    pub const ZERO: ExposureValue = ExposureValue(0.0);

    pub fn stops(self) -> f64 {
        self.0
    }

    pub fn factor(self) -> f64 {
        self.0.exp2()
    }

    /// True when the value is a finite integer multiple of `step`.
    pub fn is_multiple_of(self, step: f64) -> bool {
        if !self.0.is_finite() || step <= 0.0 {
            return false;
        }
        let k = self.0 / step;
        (k - k.round()).abs() < 1e-9
    }
}

impl std::ops::Add<f64> for ExposureValue {
    type Output = ExposureValue;
    fn add(self, rhs: f64) -> ExposureValue {
        ExposureValue(self.0 + rhs)
    }
}

impl std::ops::Sub<f64> for ExposureValue {
    type Output = ExposureValue;
    fn sub(self, rhs: f64) -> ExposureValue {
        ExposureValue(self.0 - rhs)
    }
}

/// Scales every sample by `2^ev`.
pub fn apply_exposure(img: &LinearImage, ev: ExposureValue) -> LinearImage {
    img.scaled(ev.factor() as f32)
}

/// Per-pixel Rec. 709 luminance.
pub fn luminance(img: &LinearImage) -> Vec<f32> {
    img.pixels().map(|p| luma(p)).collect()
}

#[inline]
pub(crate) fn luma(p: [f32; 3]) -> f32 {
    REC709[0] * p[0] + REC709[1] * p[1] + REC709[2] * p[2]
}

/// Statistic of the log-luminance channel that auto exposure pins to the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLumaStatistic {
    /// `exp(mean(ln(L + 1e-6)))`, the log-average luminance.
    #[default]
    GeometricMean,
    /// `exp(median(ln(L + 1e-6)))`.
    Median,
}

impl LogLumaStatistic {
    pub fn evaluate(self, luma: &[f32]) -> f64 {
        let mut logs: Vec<f64> = luma
            .iter()
            .map(|&l| (l.max(0.0) as f64 + LOG_EPSILON).ln())
            .collect();
        match self {
            // sequential sum keeps the reduction order fixed
            LogLumaStatistic::GeometricMean => {
                (logs.iter().sum::<f64>() / logs.len().max(1) as f64).exp()
            }
            LogLumaStatistic::Median => {
                if logs.is_empty() {
                    return LOG_EPSILON;
                }
                logs.sort_by(f64::total_cmp);
                let n = logs.len();
                let m = if n % 2 == 1 {
                    logs[n / 2]
                } else {
                    0.5 * (logs[n / 2 - 1] + logs[n / 2])
                };
                m.exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutoExposure {
    pub image: LinearImage,
    pub scale: f64,
}

/// Rescales `img` so the chosen log-luma statistic equals `key`.
pub fn auto_expose(img: &LinearImage, key: f64, statistic: LogLumaStatistic) -> Result<AutoExposure> {
    if !(key.is_finite() && key > 0.0) {
        return Err(Error::invalid(format!("auto-exposure key must be > 0, got {key}")));
    }
    if !img.data().iter().any(|&v| v > 0.0) {
        return Err(Error::invalid("cannot auto-expose an all-zero image"));
    }
    let stat = statistic.evaluate(&luminance(img));
    let scale = key / stat;
    Ok(AutoExposure {
        image: img.scaled(scale as f32),
        scale,
    })
}

/// Per-pixel saturation flags from the maximum channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationMask {
    pub width: usize,
    pub height: usize,
    pub over: Vec<bool>,
    pub under: Vec<bool>,
    pub over_count: usize,
    pub under_count: usize,
}

impl SaturationMask {
    pub fn over_fraction(&self) -> f64 {
        self.over_count as f64 / (self.width * self.height).max(1) as f64
    }

    pub fn under_fraction(&self) -> f64 {
        self.under_count as f64 / (self.width * self.height).max(1) as f64
    }
}

/// Flags a pixel over-saturated when its max channel is `>= hi`,
/// under-saturated when its max channel is `<= lo`.
pub fn saturation_mask(img: &DisplayImage, lo: f32, hi: f32) -> Result<SaturationMask> {
    if !(lo < hi) {
        return Err(Error::invalid(format!(
            "saturation thresholds need lo < hi, got lo={lo} hi={hi}"
        )));
    }
    let n = img.pixel_count();
    let mut over = Vec::with_capacity(n);
    let mut under = Vec::with_capacity(n);
    for p in img.data().chunks_exact(3) {
        let m = p[0].max(p[1]).max(p[2]);
        over.push(m >= hi);
        under.push(m <= lo);
    }
    let over_count = over.iter().filter(|&&b| b).count();
    let under_count = under.iter().filter(|&&b| b).count();
    Ok(SaturationMask {
        width: img.width(),
        height: img.height(),
        over,
        under,
        over_count,
        under_count,
    })
}
