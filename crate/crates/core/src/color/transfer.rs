//! Display transfer curves.
//!
//! Every curve maps linear `[0, 1]` onto display `[0, 1]` with `encode(0) = 0`
//! and `encode(1) = 1`, and is strictly monotone so `decode` is its exact inverse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const GAMMA: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    /// Pure power law, `v^(1/2.2)`.
    Gamma22,
    /// Hable (Uncharted 2) filmic curve, white point 11.2, followed by gamma 2.2.
    Filmic,
    /// ITU-R BT.2100 hybrid log-gamma OETF.
    Hlg,
}

impl Transfer {
    pub const ALL: [Transfer; 3] = [Transfer::Gamma22, Transfer::Filmic, Transfer::Hlg];

    /// Linear `[0, 1]` to display `[0, 1]`. Input is clamped first.
    pub fn encode(self, linear: f64) -> f64 {
        let x = clamp01(linear);
        let y = match self {
            Transfer::Gamma22 => x.powf(1.0 / GAMMA),
            Transfer::Filmic => hable::encode(x).powf(1.0 / GAMMA),
            Transfer::Hlg => hlg::oetf(x),
        };
        clamp01(y)
    }

    /// Display `[0, 1]` to linear `[0, 1]`.
    pub fn decode(self, display: f64) -> f64 {
        let y = clamp01(display);
        let x = match self {
            Transfer::Gamma22 => y.powf(GAMMA),
            Transfer::Filmic => hable::decode(y.powf(GAMMA)),
            Transfer::Hlg => hlg::inverse_oetf(y),
        };
        clamp01(x)
    }

    pub fn name(self) -> &'static str {
        match self {
            Transfer::Gamma22 => "gamma22",
            Transfer::Filmic => "filmic",
            Transfer::Hlg => "hlg",
        }
    }
}

impl fmt::Display for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gamma22" | "gamma" => Ok(Transfer::Gamma22),
            "filmic" | "hable" => Ok(Transfer::Filmic),
            "hlg" => Ok(Transfer::Hlg),
            other => Err(Error::invalid(format!("unknown transfer tag {other:?}"))),
        }
    }
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

mod hable {
    const A: f64 = 0.15;
    const B: f64 = 0.50;
    const C: f64 = 0.10;
    const D: f64 = 0.20;
    const E: f64 = 0.02;
    const F: f64 = 0.30;
    const WHITE: f64 = 11.2;

    fn curve(t: f64) -> f64 {
        ((t * (A * t + C * B) + D * E) / (t * (A * t + B) + D * F)) - E / F
    }

    /// `[0, 1]` is stretched onto `[0, WHITE]` so that 1 maps to 1.
    pub(super) fn encode(x: f64) -> f64 {
        curve(x * WHITE) / curve(WHITE)
    }

    pub(super) fn decode(y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        // curve(t) = k  <=>  A(1-k) t^2 + B(C-k) t + DF (E/F - k) = 0
        let k = y * curve(WHITE) + E / F;
        let qa = A * (1.0 - k);
        let qb = B * (C - k);
        let qc = D * (E - k * F);
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        // qa > 0 and qc < 0 on the valid range, so the + root is the positive one.
        let t = (-qb + disc.sqrt()) / (2.0 * qa);
        t / WHITE
    }
}

mod hlg {
    const A: f64 = 0.178_832_77;
    const B: f64 = 1.0 - 4.0 * A;
    // c = 0.5 - a ln(4a)
    const C: f64 = 0.559_910_729_529_562_3;

    pub(super) fn oetf(e: f64) -> f64 {
        if e <= 1.0 / 12.0 {
            (3.0 * e).sqrt()
        } else {
            A * (12.0 * e - B).ln() + C
        }
    }

    pub(super) fn inverse_oetf(v: f64) -> f64 {
        if v <= 0.5 {
            v * v / 3.0
        } else {
            (((v - C) / A).exp() + B) / 12.0
        }
    }
}
