use super::{Direction, ExposurePredictor, PredictorError};
use crate::color::{apply_exposure, delinearize, DisplayImage, ExposureValue, LinearImage, Transfer};
use crate::io::png::{quantize, BitDepth};

/// A perfect predictor: re-exposes known ground truth, then clamps and tonemaps.
pub fn oracle_predict(gt: &LinearImage, current_ev: ExposureValue, direction: Direction, step: f64) -> DisplayImage {
    let ev = current_ev + direction.sign() * step;
    delinearize(&apply_exposure(gt, ev), Transfer::Gamma22)
}

#[derive(Debug, Clone)]
pub struct OraclePredictor {
    gt: LinearImage,
}

impl OraclePredictor {
    pub fn new(gt: LinearImage) -> Self {
        Self { gt }
    }

    pub fn ground_truth(&self) -> &LinearImage {
        &self.gt
    }
}

impl ExposurePredictor for OraclePredictor {
    fn predict(
        &mut self,
        img: &DisplayImage,
        current_ev: ExposureValue,
        direction: Direction,
        step: f64,
    ) -> Result<DisplayImage, PredictorError> {
        if img.dims() != self.gt.dims() {
            return Err(PredictorError::DimensionMismatch {
                expected: self.gt.dims(),
                got: img.dims(),
            });
        }
        Ok(oracle_predict(&self.gt, current_ev, direction, step))
    }
}

/// Returns its input unchanged; never makes progress.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoPredictor;

impl ExposurePredictor for EchoPredictor {
    fn predict(
        &mut self,
        img: &DisplayImage,
        _: ExposureValue,
        _: Direction,
        _: f64,
    ) -> Result<DisplayImage, PredictorError> {
        Ok(img.clone())
    }
}

/// Recovers the exposure of `img` relative to `gt` for an out-of-process oracle,
/// which sees only pixels. Candidates are multiples of `step` within +-64 stops;
/// the one whose 16-bit rendering is closest to `img` wins.
pub fn infer_ev(gt: &LinearImage, img: &DisplayImage, step: f64) -> Result<ExposureValue, PredictorError> {
    if img.dims() != gt.dims() {
        return Err(PredictorError::DimensionMismatch {
            expected: gt.dims(),
            got: img.dims(),
        });
    }
    let k_max = (64.0 / step).floor() as i64;
    let mut best = (f64::INFINITY, ExposureValue::ZERO);
    for k in -k_max..=k_max {
        let ev = ExposureValue(k as f64 * step);
        let f = ev.factor();
        let err: f64 = gt
            .data()
            .iter()
            .zip(img.data())
            .map(|(&g, &d)| {
                let rendered = quantize(Transfer::Gamma22.encode(g as f64 * f) as f32, BitDepth::Sixteen);
                (rendered - d).abs() as f64
            })
            .sum();
        if err < best.0 {
            best = (err, ev);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> LinearImage {
        LinearImage::from_fn(16, 4, |x, y| [(x as f32 - 4.0).exp2(), (y as f32).exp2() * 0.01, 0.3])
    }

    #[test]
    fn stateless_in_ground_truth() {
        let g = gt();
        let i0 = oracle_predict(&g, ExposureValue(0.0), Direction::Brighter, 0.0);
        let mut o = OraclePredictor::new(g.clone());
        let b1 = o.predict(&i0, ExposureValue(0.0), Direction::Brighter, 2.0).unwrap();
        let b2 = o.predict(&b1, ExposureValue(2.0), Direction::Brighter, 2.0).unwrap();
        let d1 = o.predict(&b2, ExposureValue(4.0), Direction::Darker, 2.0).unwrap();
        let d2 = o.predict(&d1, ExposureValue(2.0), Direction::Darker, 2.0).unwrap();
        assert_eq!(d2, delinearize(&g, Transfer::Gamma22));
    }

    #[test]
    fn darker_quarters_unclamped_values() {
        let g = LinearImage::filled(2, 2, [0.5, 0.1, 0.9]);
        let d = oracle_predict(&g, ExposureValue(0.0), Direction::Darker, 2.0);
        let lin = crate::color::linearize(&d);
        for (a, b) in g.data().iter().zip(lin.data()) {
            assert!((a / 4.0 - b).abs() < 1e-6);
        }
    }

    #[test]
    fn brighter_saturates_exactly_above_threshold() {
        let g = gt();
        let (ev, step) = (1.0, 2.0);
        let out = oracle_predict(&g, ExposureValue(ev), Direction::Brighter, step);
        for (&v, &d) in g.data().iter().zip(out.data()) {
            let over = (v as f64) >= (-(ev + step)).exp2();
            assert_eq!(d >= 1.0, over, "value {v}");
        }
    }

    #[test]
    fn infers_the_rendering_exposure() {
        let g = gt();
        for k in [-3i32, 0, 2, 3] {
            let ev = ExposureValue(2.0 * k as f64);
            let img = crate::io::png::quantized(
                &delinearize(&crate::color::apply_exposure(&g, ev), Transfer::Gamma22),
                BitDepth::Sixteen,
            );
            assert_eq!(infer_ev(&g, &img, 2.0).unwrap(), ev);
        }
    }
}
