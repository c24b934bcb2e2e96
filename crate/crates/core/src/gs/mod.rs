//! HDR Gaussian-splat scenes: rasterization with analytic gradients, fitting,
//! emitter classification, environment baking and PLY interchange.

pub mod bake;
pub mod camera;
pub mod emitters;
pub mod fit;
pub mod loss;
pub mod ply;
pub mod raster;
pub mod scene;
pub mod sh;
pub mod synthetic;

pub use camera::{Camera, CameraView};
pub use raster::{rasterize, render, RasterSettings, Rasterization};
pub use scene::{Gaussian, GaussianScene};
pub use bake::bake_envmap;
pub use emitters::{classify_emitters, EmitterSet};
pub use fit::{fit, FitConfig, FitResult};
