use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::Transfer;

/// Camera and augmentation parameters for one perspective crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoSample {
    /// Radians in `[0, 2pi)`.
    pub azimuth: f64,
    /// Radians in `[-pi/2, pi/2]`.
    pub elevation: f64,
    /// Radians in `[-pi/16, pi/16]`.
    pub roll: f64,
    /// Vertical field of view in radians, `[60deg, 120deg]`.
    pub vfov: f64,
    /// Stops in `[-8, 4]`.
    pub exposure_ev: f64,
    pub transfer: Transfer,
}

impl PanoSample {
    pub fn is_valid(&self) -> bool {
        (0.0..TAU).contains(&self.azimuth)
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.elevation)
            && (-PI / 16.0..=PI / 16.0).contains(&self.roll)
            && (60f64.to_radians()..=120f64.to_radians()).contains(&self.vfov)
            && (-8.0..=4.0).contains(&self.exposure_ev)
    }
}

pub fn sample_params(seed: u64) -> PanoSample {
    sample_params_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Independent uniform draws for every field.
pub fn sample_params_with<R: Rng + ?Sized>(rng: &mut R) -> PanoSample {
    let azimuth = rng.random_range(0.0..TAU);
    let elevation = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    let roll = rng.random_range(-PI / 16.0..=PI / 16.0);
    let vfov = rng.random_range(60f64.to_radians()..=120f64.to_radians());
    let exposure_ev = rng.random_range(-8.0..=4.0);
    let transfer = Transfer::ALL[rng.random_range(0..Transfer::ALL.len())];
    PanoSample {
        azimuth,
        elevation,
        roll,
        vfov,
        exposure_ev,
        transfer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_draw_is_repeatable() {
        assert_eq!(sample_params(42), sample_params(42));
        assert_ne!(sample_params(42), sample_params(43));
    }

    #[test]
    fn draws_respect_ranges_and_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut sum = 0.0;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let s = sample_params_with(&mut rng);
            assert!(s.is_valid(), "{s:?}");
            assert!(s.vfov >= 60f64.to_radians() && s.vfov <= 120f64.to_radians());
            sum += s.elevation;
            counts[Transfer::ALL.iter().position(|t| *t == s.transfer).unwrap()] += 1;
        }
        let mean = sum / n as f64;
        // sd of U[-pi/2, pi/2] is pi/sqrt(12); the mean's sd shrinks by sqrt(n)
        let sigma = PI / 12f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}");
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }
}
