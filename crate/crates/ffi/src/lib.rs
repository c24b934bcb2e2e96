//! C interface to gaslight.
//!
//! Objects cross the boundary as opaque pointers that the caller releases with
//! the matching `_free` function. Every fallible call returns a [`GslStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`gsl_last_error`]. Panics are caught and reported as
//! `GSL_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gaslight::bracket::{expand_stack, ExpandLimits, OraclePredictor};
use gaslight::color::{delinearize, LinearImage, Transfer};
use gaslight::geom::Vec3;
use gaslight::gs::ply::{read_ply, write_ply};
use gaslight::gs::{bake_envmap, classify_emitters, GaussianScene};
use gaslight::merge::{merge, WeightProfile};
use gaslight::metrics::{compare, CompareOptions, Domain};
use gaslight::relight::{render, PartialIbl, SceneSpec};
use gaslight::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Predictor = 5,
    Diverged = 6,
    Panic = 7,
    Internal = 8,
}

/// Linear RGB float image.
pub struct GslImage(LinearImage);

/// Gaussian splat scene.
pub struct GslScene(GaussianScene);

/// Image comparison results; see `gsl_compare`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GslMetrics {
    pub mse: f64,
    pub psnr: f64,
    /// Mean RGB angle in degrees.
    pub angular_error: f64,
    pub pu21_psnr: f64,
    /// Factor applied to the prediction before comparing (1 without alignment).
    pub alignment_scale: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GslExpansion {
    pub darker_steps: u32,
    pub brighter_steps: u32,
    pub truncated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> GslStatus {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => GslStatus::InvalidArgument,
        Error::Io { .. } => GslStatus::Io,
        Error::Format { .. } | Error::Png(_) | Error::Json(_) | Error::Ply(_) => GslStatus::Format,
        Error::Predictor(_) => GslStatus::Predictor,
        Error::Diverged { .. } => GslStatus::Diverged,
        Error::Stage { source, .. } => status_of(source),
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GslStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            GslStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            GslStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GslStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gsl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or 0
/// if no call has failed on this thread.
#[no_mangle]
pub unsafe extern "C" fn gsl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// New `width` x `height` image from interleaved RGB floats, or zeros if
/// `data` is null.
#[no_mangle]
pub unsafe extern "C" fn gsl_image_new(width: usize, height: usize, data: *const f32, out: *mut *mut GslImage) -> GslStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .ok_or_else(|| Failure::Invalid("image size overflows".into()))?;
        let img = if data.is_null() {
            LinearImage::zeros(width, height)
        } else {
            LinearImage::new(width, height, std::slice::from_raw_parts(data, n).to_vec())?
        };
        put(out, GslImage(img))
    })
}

/// Reads a `.hdr` or `.pfm` file.
#[no_mangle]
pub unsafe extern "C" fn gsl_image_read(path: *const c_char, out: *mut *mut GslImage) -> GslStatus {
    guard(|| {
        let img = gaslight::io::read_linear(path_arg(path)?)?;
        put(out, GslImage(img))
    })
}

/// Writes `.hdr` or `.pfm` by extension.
#[no_mangle]
pub unsafe extern "C" fn gsl_image_write(img: *const GslImage, path: *const c_char) -> GslStatus {
    guard(|| {
        let img = borrow(img, "image")?;
        Ok(gaslight::io::write_linear(&img.0, path_arg(path)?)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsl_image_dims(img: *const GslImage, width: *mut usize, height: *mut usize) -> GslStatus {
    guard(|| {
        let (w, h) = borrow(img, "image")?.0.dims();
        if width.is_null() || height.is_null() {
            return Err(Failure::Null("width/height"));
        }
        *width = w;
        *height = h;
        Ok(())
    })
}

/// Copies the interleaved RGB samples into `dst`, which must hold `3 * w * h` floats.
#[no_mangle]
pub unsafe extern "C" fn gsl_image_copy_data(img: *const GslImage, dst: *mut f32, len: usize) -> GslStatus {
    guard(|| {
        let data = borrow(img, "image")?.0.data();
        if dst.is_null() {
            return Err(Failure::Null("dst"));
        }
        if len < data.len() {
            return Err(Failure::Invalid(format!("buffer holds {len} floats, image has {}", data.len())));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), dst, data.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsl_image_free(img: *mut GslImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Tonemaps `gt` to gamma-2.2 LDR, expands it with the ground-truth oracle, and
/// merges the stack. `expansion` may be null.
#[no_mangle]
pub unsafe extern "C" fn gsl_oracle_roundtrip(
    gt: *const GslImage,
    max_steps: u32,
    step_ev: f64,
    out: *mut *mut GslImage,
    expansion: *mut GslExpansion,
) -> GslStatus {
    guard(|| {
        let gt = &borrow(gt, "gt")?.0;
        let limits = ExpandLimits {
            max_steps_per_side: max_steps as usize,
            step_ev,
            ..Default::default()
        };
        if !(step_ev > 0.0 && step_ev.is_finite()) {
            return Err(Failure::Invalid(format!("step_ev must be positive, got {step_ev}")));
        }
        let i0 = delinearize(gt, Transfer::Gamma22);
        let ex = expand_stack(&i0, &mut OraclePredictor::new(gt.clone()), &limits).map_err(|e| Error::Predictor(e.source))?;
        let merged = merge(&ex.stack, &WeightProfile::default())?;
        if !expansion.is_null() {
            *expansion = GslExpansion {
                darker_steps: ex.darker_steps as u32,
                brighter_steps: ex.brighter_steps as u32,
                truncated: ex.truncated(),
            };
        }
        put(out, GslImage(merged))
    })
}

/// Compares `pred` with `gt` in display (`linear` false) or linear space,
/// optionally after exposure alignment.
#[no_mangle]
pub unsafe extern "C" fn gsl_compare(
    pred: *const GslImage,
    gt: *const GslImage,
    align: bool,
    linear: bool,
    out: *mut GslMetrics,
) -> GslStatus {
    guard(|| {
        let opts = CompareOptions {
            align,
            domain: if linear { Domain::Linear } else { Domain::Display },
            ..Default::default()
        };
        let r = compare(&borrow(pred, "pred")?.0, &borrow(gt, "gt")?.0, &opts)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = GslMetrics {
            mse: r.mse,
            psnr: r.psnr,
            angular_error: r.angular_error,
            pu21_psnr: r.pu21_psnr,
            alignment_scale: r.alignment_scale,
        };
        Ok(())
    })
}

/// Renders the default sphere-and-plane scene lit by `env` as a 90 degree
/// partial environment facing +Z.
#[no_mangle]
pub unsafe extern "C" fn gsl_relight(
    env: *const GslImage,
    width: usize,
    height: usize,
    samples: usize,
    seed: u64,
    out: *mut *mut GslImage,
) -> GslStatus {
    guard(|| {
        let scene = SceneSpec {
            width,
            height,
            samples,
            seed,
            ..Default::default()
        };
        let img = render(&scene, &PartialIbl::new(borrow(env, "env")?.0.clone()))?;
        put(out, GslImage(img))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsl_scene_read_ply(path: *const c_char, out: *mut *mut GslScene) -> GslStatus {
    guard(|| {
        let scene = read_ply(path_arg(path)?)?;
        put(out, GslScene(scene))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsl_scene_write_ply(scene: *const GslScene, path: *const c_char) -> GslStatus {
    guard(|| Ok(write_ply(&borrow(scene, "scene")?.0, path_arg(path)?)?))
}

/// Number of gaussians, or 0 for a null scene.
#[no_mangle]
pub unsafe extern "C" fn gsl_scene_len(scene: *const GslScene) -> usize {
    scene.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn gsl_scene_free(scene: *mut GslScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Equirectangular environment map of `width` x `width / 2` seen from (x, y, z).
#[no_mangle]
pub unsafe extern "C" fn gsl_scene_bake(
    scene: *const GslScene,
    x: f64,
    y: f64,
    z: f64,
    width: usize,
    out: *mut *mut GslImage,
) -> GslStatus {
    guard(|| {
        let env = bake_envmap(&borrow(scene, "scene")?.0, Vec3::new(x, y, z), width)?;
        put(out, GslImage(env))
    })
}

/// Indices of gaussians brighter than `threshold` in some direction. Writes at
/// most `capacity` indices and the total count to `count`; `indices` may be
/// null to query the count.
#[no_mangle]
pub unsafe extern "C" fn gsl_scene_emitters(
    scene: *const GslScene,
    threshold: f64,
    indices: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> GslStatus {
    guard(|| {
        let set = classify_emitters(&borrow(scene, "scene")?.0, threshold, gaslight::gs::emitters::DEFAULT_DIRECTIONS);
        if count.is_null() {
            return Err(Failure::Null("count"));
        }
        *count = set.indices.len();
        if !indices.is_null() {
            let n = set.indices.len().min(capacity);
            std::ptr::copy_nonoverlapping(set.indices.as_ptr(), indices, n);
        }
        Ok(())
    })
}
