//! HDR environment map reconstruction from a single LDR panorama, plus the
//! relighting and Gaussian-splatting evaluation around it.

pub mod bracket;
pub mod color;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geom;
pub mod gs;
pub mod io;
pub mod merge;
pub mod metrics;
pub mod pano;
pub mod pipeline;
pub mod relight;

pub use error::{Error, Result};
