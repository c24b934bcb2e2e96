//! PU21 perceptually uniform encoding of absolute luminance
//! (the "banding with glare" fit).

/// Valid luminance domain of the fit, cd/m^2.
pub const L_MIN: f64 = 0.005;
pub const L_MAX: f64 = 10_000.0;

/// Image value 1.0 corresponds to this many cd/m^2 by default.
pub const DEFAULT_LUMINANCE_SCALE: f64 = 100.0;

const P: [f64; 7] = [
    0.353_487_901,
    0.373_465_862_9,
    8.277_049_286e-5,
    0.906_256_262_7,
    0.091_503_031_66,
    0.909_951_720_4,
    596.314_814_2,
];

/// Encodes absolute luminance (cd/m^2), clamped to `[L_MIN, L_MAX]`.
pub fn encode_luminance(y: f64) -> f64 {
    let y = if y.is_nan() { L_MIN } else { y.clamp(L_MIN, L_MAX) };
    let yp = y.powf(P[3]);
    let v = P[6] * (((P[0] + P[1] * yp) / (1.0 + P[2] * yp)).powf(P[4]) - P[5]);
    v.max(0.0)
}

/// Encoded value at `L_MAX`; the PSNR peak.
pub fn peak() -> f64 {
    encode_luminance(L_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_end_is_near_zero() {
        // direct evaluation of the rational fit at 0.005 cd/m^2
        let y: f64 = 0.005;
        let yp = y.powf(0.9062562627);
        let v = 596.3148142
            * (((0.353487901 + 0.3734658629 * yp) / (1.0 + 8.277049286e-05 * yp)).powf(0.09150303166)
                - 0.9099517204);
        assert!((encode_luminance(0.005) - v.max(0.0)).abs() < 1e-12);
        assert!(encode_luminance(0.005) < 0.5);
    }

    #[test]
    fn peak_and_clamping() {
        let p = peak();
        assert!(p > 590.0 && p < 600.0, "{p}");
        assert_eq!(encode_luminance(1e6), p);
        assert_eq!(encode_luminance(0.0), encode_luminance(L_MIN));
    }
}
