//! Exposure-stack expansion around a pluggable exposure predictor.
//!
//! Starting from `I_0`, the darker predictor is applied to the darkest entry
//! while it still has over-saturated pixels, and the brighter predictor to the
//! brightest entry while it still has under-saturated pixels.

mod external;
mod oracle;
pub mod protocol;
mod stack;

pub use external::{ExternalPredictor, DEFAULT_TIMEOUT, TIMEOUT_ENV};
pub use oracle::{infer_ev, oracle_predict, EchoPredictor, OraclePredictor};
pub use stack::{ExposureStack, StackEntry};

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::color::{saturation_mask, DisplayImage, ExposureValue, DEFAULT_SAT_HI, DEFAULT_SAT_LO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Darker,
    Brighter,
}

impl Direction {
    /// Sign of the ev change.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Darker => -1.0,
            Direction::Brighter => 1.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("failed to start predictor {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("predictor timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed predictor message: {0}")]
    Malformed(String),
    #[error("predictor returned {got:?} for a {expected:?} input")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("predictor exited with {0}")]
    ProcessFailed(String),
    #[error("predictor i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// A model producing the same scene `step` stops darker or brighter.
pub trait ExposurePredictor {
    /// `current_ev` is the exposure of `img` relative to `I_0`. Implementations
    /// that only see pixels (external processes) may ignore it.
    fn predict(
        &mut self,
        img: &DisplayImage,
        current_ev: ExposureValue,
        direction: Direction,
        step: f64,
    ) -> Result<DisplayImage, PredictorError>;
}

impl<P: ExposurePredictor + ?Sized> ExposurePredictor for &mut P {
    fn predict(
        &mut self,
        img: &DisplayImage,
        current_ev: ExposureValue,
        direction: Direction,
        step: f64,
    ) -> Result<DisplayImage, PredictorError> {
        (**self).predict(img, current_ev, direction, step)
    }
}

impl<P: ExposurePredictor + ?Sized> ExposurePredictor for Box<P> {
    fn predict(
        &mut self,
        img: &DisplayImage,
        current_ev: ExposureValue,
        direction: Direction,
        step: f64,
    ) -> Result<DisplayImage, PredictorError> {
        (**self).predict(img, current_ev, direction, step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpandLimits {
    pub max_steps_per_side: usize,
    pub step_ev: f64,
    /// Expansion on a side stops once at most this fraction of pixels is saturated.
    pub tolerance_fraction: f64,
    pub sat_lo: f32,
    pub sat_hi: f32,
}

impl Default for ExpandLimits {
    fn default() -> Self {
        Self {
            max_steps_per_side: 8,
            step_ev: 2.0,
            tolerance_fraction: 0.001,
            sat_lo: DEFAULT_SAT_LO,
            sat_hi: DEFAULT_SAT_HI,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub stack: ExposureStack,
    pub darker_steps: usize,
    pub brighter_steps: usize,
    /// The side hit `max_steps_per_side` while still saturated.
    pub truncated_darker: bool,
    pub truncated_brighter: bool,
}

impl Expansion {
    pub fn truncated(&self) -> bool {
        self.truncated_darker || self.truncated_brighter
    }
}

#[derive(Debug, thiserror::Error)]
#[error("expansion failed on the {direction:?} side after {} entries: {source}", partial.len())]
pub struct ExpandError {
    pub direction: Direction,
    pub partial: ExposureStack,
    #[source]
    pub source: PredictorError,
}

/// Builds an exposure stack from `i0`. `i0` is cloned, never modified.
pub fn expand_stack<P: ExposurePredictor + ?Sized>(
    i0: &DisplayImage,
    predictor: &mut P,
    limits: &ExpandLimits,
) -> Result<Expansion, ExpandError> {
    let mut stack = ExposureStack::single(i0.clone(), limits.step_ev);
    let mut out = Expansion {
        stack: stack.clone(),
        darker_steps: 0,
        brighter_steps: 0,
        truncated_darker: false,
        truncated_brighter: false,
    };
    for direction in [Direction::Darker, Direction::Brighter] {
        let mut steps = 0;
        loop {
            let extreme = match direction {
                Direction::Darker => stack.darkest(),
                Direction::Brighter => stack.brightest(),
            };
            if !still_saturated(&extreme.image, direction, limits) {
                break;
            }
            if steps >= limits.max_steps_per_side {
                match direction {
                    Direction::Darker => out.truncated_darker = true,
                    Direction::Brighter => out.truncated_brighter = true,
                }
                break;
            }
            let next = predictor
                .predict(&extreme.image, extreme.ev, direction, limits.step_ev)
                .and_then(|img| conform(img, &extreme.image));
            let next = match next {
                Ok(img) => img,
                Err(source) => {
                    return Err(ExpandError {
                        direction,
                        partial: stack,
                        source,
                    })
                }
            };
            match direction {
                Direction::Darker => stack.push_darker(next),
                Direction::Brighter => stack.push_brighter(next),
            }
            steps += 1;
        }
        match direction {
            Direction::Darker => out.darker_steps = steps,
            Direction::Brighter => out.brighter_steps = steps,
        }
    }
    out.stack = stack;
    Ok(out)
}

fn still_saturated(img: &DisplayImage, direction: Direction, limits: &ExpandLimits) -> bool {
    let mask = match saturation_mask(img, limits.sat_lo, limits.sat_hi) {
        Ok(m) => m,
        Err(_) => return false,
    };
    let frac = match direction {
        Direction::Darker => mask.over_fraction(),
        Direction::Brighter => mask.under_fraction(),
    };
    frac > limits.tolerance_fraction
}

fn conform(img: DisplayImage, like: &DisplayImage) -> Result<DisplayImage, PredictorError> {
    if img.dims() != like.dims() {
        return Err(PredictorError::DimensionMismatch {
            expected: like.dims(),
            got: img.dims(),
        });
    }
    Ok(img.with_transfer(like.transfer()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{delinearize, LinearImage, Transfer};

    fn ramp_gt(lo_stops: f64, hi_stops: f64) -> LinearImage {
        LinearImage::from_fn(64, 16, |x, _| {
            let s = lo_stops + (hi_stops - lo_stops) * x as f64 / 63.0;
            [s.exp2() as f32; 3]
        })
    }

    #[test]
    fn unsaturated_input_stays_single() {
        let i0 = DisplayImage::filled(8, 8, [0.5; 3], Transfer::Gamma22);
        let mut echo = EchoPredictor;
        let e = expand_stack(&i0, &mut echo, &ExpandLimits::default()).unwrap();
        assert_eq!(e.stack.len(), 1);
        assert!(!e.truncated());
    }

    #[test]
    fn oracle_clears_highlights() {
        let gt = ramp_gt(-3.0, 7.0);
        let i0 = delinearize(&gt, Transfer::Gamma22);
        let mut oracle = OraclePredictor::new(gt);
        let limits = ExpandLimits {
            tolerance_fraction: 0.0,
            ..Default::default()
        };
        let e = expand_stack(&i0, &mut oracle, &limits).unwrap();
        let m = saturation_mask(&e.stack.darkest().image, DEFAULT_SAT_LO, DEFAULT_SAT_HI).unwrap();
        assert_eq!(m.over_count, 0);
        assert_eq!(e.darker_steps, 4);
        assert_eq!(e.brighter_steps, 0);
        assert!(!e.truncated());
        assert_eq!(e.stack.reference().image, i0);
    }

    #[test]
    fn echo_predictor_hits_the_cap() {
        let i0 = DisplayImage::filled(8, 8, [1.0; 3], Transfer::Gamma22);
        let limits = ExpandLimits {
            max_steps_per_side: 3,
            ..Default::default()
        };
        let e = expand_stack(&i0, &mut EchoPredictor, &limits).unwrap();
        assert!(e.truncated_darker && !e.truncated_brighter);
        assert_eq!(e.stack.evs(), vec![-6.0, -4.0, -2.0, 0.0]);
    }

    struct Shrinker;
    impl ExposurePredictor for Shrinker {
        fn predict(&mut self, _: &DisplayImage, _: ExposureValue, _: Direction, _: f64) -> Result<DisplayImage, PredictorError> {
            Ok(DisplayImage::filled(2, 2, [0.0; 3], Transfer::Gamma22))
        }
    }

    #[test]
    fn dimension_mismatch_keeps_partial_stack_intact() {
        let i0 = DisplayImage::filled(8, 8, [1.0; 3], Transfer::Gamma22);
        let err = expand_stack(&i0, &mut Shrinker, &ExpandLimits::default()).unwrap_err();
        assert!(matches!(err.source, PredictorError::DimensionMismatch { .. }));
        assert_eq!(err.partial.len(), 1);
        assert_eq!(err.partial.reference().image, i0);
    }
}
