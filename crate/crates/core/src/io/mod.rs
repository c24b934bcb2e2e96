//! File formats: Radiance RGBE and PFM for linear images, PNG for display images.

pub mod pfm;
pub mod png;
pub mod rgbe;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::color::{DisplayImage, LinearImage, Transfer};
use crate::error::{Error, Result};

/// Reads `.hdr` or `.pfm` by extension.
pub fn read_linear(path: impl AsRef<Path>) -> Result<LinearImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    let reader = BufReader::new(file);
    match extension(path).as_str() {
        "hdr" | "pic" => rgbe::read(reader),
        "pfm" => pfm::read(reader),
        other => Err(Error::invalid(format!(
            "{}: unsupported linear image extension {other:?}",
            path.display()
        ))),
    }
}

pub fn write_linear(img: &LinearImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut out = BufWriter::new(file);
    match extension(path).as_str() {
        "hdr" | "pic" => rgbe::write(img, &mut out)?,
        "pfm" => pfm::write(img, &mut out)?,
        other => {
            return Err(Error::invalid(format!(
                "{}: unsupported linear image extension {other:?}",
                path.display()
            )))
        }
    }
    out.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_display(path: impl AsRef<Path>, transfer: Transfer) -> Result<DisplayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    png::read(BufReader::new(file), transfer)
}

pub fn write_display(img: &DisplayImage, path: impl AsRef<Path>, depth: png::BitDepth) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut out = BufWriter::new(file);
    png::write(img, &mut out, depth)?;
    out.flush().map_err(|e| Error::io_at(path, e))
}

pub fn is_linear_image(path: &Path) -> bool {
    matches!(extension(path).as_str(), "hdr" | "pic" | "pfm")
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}
