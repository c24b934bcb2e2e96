//! Perspective-crop training sets cut from HDR panoramas.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, png::BitDepth};
use crate::pano::{render_crop, sample_params_with, PanoSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub crops_per_panorama: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            crops_per_panorama: 8,
            seed: 0,
            width: 256,
            height: 256,
        }
    }
}

/// JSON sidecar written next to each crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub panorama: String,
    pub index: usize,
    pub image: String,
    pub sample: PanoSample,
}

/// Linear panoramas in `dir`, sorted by file name.
pub fn list_panoramas(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io_at(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io_at(dir, e))?.path();
        if p.is_file() && io::is_linear_image(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Writes `crops_per_panorama` PNG + JSON pairs per panorama into `out_dir`.
///
/// Each panorama draws from its own stream of a generator seeded with `seed`,
/// so adding files does not perturb the crops of earlier ones.
pub fn make_dataset(pano_dir: &Path, out_dir: &Path, cfg: &DatasetConfig) -> Result<Vec<CropRecord>> {
    if cfg.width == 0 || cfg.height == 0 {
        return Err(Error::invalid("crop size must be positive"));
    }
    let panos = list_panoramas(pano_dir)?;
    if panos.is_empty() {
        log::warn!("no .hdr/.pfm panoramas in {}; dataset is empty", pano_dir.display());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    let mut records = Vec::new();
    for (pi, path) in panos.iter().enumerate() {
        let pano = io::read_linear(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pano").to_string();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(pi as u64);
        for i in 0..cfg.crops_per_panorama {
            let sample = sample_params_with(&mut rng);
            let crop = render_crop(&pano, &sample, cfg.width, cfg.height)?;
            let name = format!("{stem}_{i:04}");
            let image = format!("{name}.png");
            io::write_display(&crop, out_dir.join(&image), BitDepth::Eight)?;
            let rec = CropRecord {
                panorama: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                index: i,
                image,
                sample,
            };
            let json = serde_json::to_string_pretty(&rec)?;
            let side = out_dir.join(format!("{name}.json"));
            std::fs::write(&side, json).map_err(|e| Error::io_at(side, e))?;
            records.push(rec);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::LinearImage;

    fn pano_dir() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        let img = LinearImage::from_fn(64, 32, |x, y| [x as f32 / 64.0, y as f32 / 32.0, 0.5]);
        io::write_linear(&img, d.path().join("a.hdr")).unwrap();
        io::write_linear(&img.scaled(2.0), d.path().join("b.pfm")).unwrap();
        d
    }

    #[test]
    fn crop_count_matches_request() {
        let src = pano_dir();
        let out = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig { crops_per_panorama: 3, width: 16, height: 12, ..Default::default() };
        let recs = make_dataset(src.path(), out.path(), &cfg).unwrap();
        assert_eq!(recs.len(), 6);
        let files = std::fs::read_dir(out.path()).unwrap().count();
        assert_eq!(files, 12);
        for r in &recs {
            assert!(r.sample.is_valid());
        }
    }

    #[test]
    fn same_seed_same_crops() {
        let src = pano_dir();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = DatasetConfig { crops_per_panorama: 2, width: 8, height: 8, seed: 5 };
        let ra = make_dataset(src.path(), a.path(), &cfg).unwrap();
        let rb = make_dataset(src.path(), b.path(), &cfg).unwrap();
        assert_eq!(ra, rb);
        for r in &ra {
            let x = std::fs::read(a.path().join(&r.image)).unwrap();
            let y = std::fs::read(b.path().join(&r.image)).unwrap();
            assert_eq!(x, y);
        }
        let rc = make_dataset(src.path(), b.path(), &DatasetConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(ra[0].sample, rc[0].sample);
    }

    #[test]
    fn empty_dir_gives_empty_dataset() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(make_dataset(src.path(), out.path(), &DatasetConfig::default()).unwrap().is_empty());
    }
}
