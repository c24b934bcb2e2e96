#![allow(dead_code)]

use std::path::Path;

use gaslight::color::{delinearize, LinearImage, Transfer};
use gaslight::gs::camera::Transforms;
use gaslight::gs::synthetic::{orbit_cameras, random_scene, render_views, SyntheticSpec};
use gaslight::gs::GaussianScene;
use gaslight::io::{self, png::BitDepth};

/// Writes `n` posed views of a small synthetic scene: LDR PNGs in
/// `root/images`, linear ground truth in `root/gt`, and `root/transforms.json`.
pub fn posed_dataset(root: &Path, n: usize, size: usize) -> GaussianScene {
    let spec = SyntheticSpec { count: 12, radiance_range: (0.05, 6.0), ..Default::default() };
    let scene = random_scene(&spec, 7).unwrap();
    let cams = orbit_cameras(n, 3.0, 0.8, 0.9, size, size).unwrap();
    let views = render_views(&scene, &cams).unwrap();
    std::fs::create_dir_all(root.join("images")).unwrap();
    std::fs::create_dir_all(root.join("gt")).unwrap();
    let mut frames = Vec::new();
    for (i, v) in views.iter().enumerate() {
        let name = format!("view_{i:02}");
        io::write_linear(&v.target, root.join("gt").join(format!("{name}.pfm"))).unwrap();
        let ldr = delinearize(&v.target, Transfer::Gamma22);
        io::write_display(&ldr, root.join("images").join(format!("{name}.png")), BitDepth::Eight).unwrap();
        frames.push((format!("images/{name}.png"), v.camera.clone()));
    }
    let t = Transforms::from_cameras(&frames).unwrap();
    std::fs::write(root.join("transforms.json"), serde_json::to_string_pretty(&t).unwrap()).unwrap();
    scene
}

/// Smooth HDR panorama with a bright sun.
pub fn sun_panorama(w: usize, h: usize) -> LinearImage {
    LinearImage::from_fn(w, h, |x, y| {
        let u = x as f32 / w as f32;
        let v = y as f32 / h as f32;
        let sky = 0.2 + 0.3 * (1.0 - v);
        let d2 = (u - 0.3).powi(2) + (v - 0.3).powi(2);
        let sun = 40.0 * (-d2 / 0.002).exp();
        [sky + sun, sky * 0.9 + sun, sky * 1.2 + sun * 0.8]
    })
}
