use gaslight::geom::Vec3;
use gaslight::gs::fit::init_from_points;
use gaslight::gs::synthetic::{jittered_points, orbit_cameras, random_scene, render_views, SyntheticSpec};
use gaslight::gs::{fit, render, FitConfig, Gaussian, GaussianScene};

// A dim background plus one emitter peaking near 2^6.
fn bright_scene() -> GaussianScene {
    let spec = SyntheticSpec {
        count: 30,
        radiance_range: (0.05, 0.8),
        degree: 0,
        view_dependence: 0.0,
        ..SyntheticSpec::default()
    };
    let bg = random_scene(&spec, 3).unwrap();
    let mut gs: Vec<Gaussian> = (0..bg.len()).map(|i| bg.gaussian(i)).collect();
    gs.push(Gaussian::isotropic(Vec3::new(0.0, 1.2, 0.0), 0.15, 0.95, [64.0 / 0.95; 3], 0));
    GaussianScene::from_gaussians(0, &gs).unwrap()
}

#[test]
fn fitted_scene_keeps_hdr_peaks() {
    let truth = bright_scene();
    let cams = orbit_cameras(8, 3.0, 0.8, 0.9, 64, 64).unwrap();
    let views = render_views(&truth, &cams).unwrap();
    let init = init_from_points(&jittered_points(&truth, 0.05, 2), None, 1, 0.5).unwrap();
    let r = fit(&views, init, &FitConfig { iterations: 500, ..FitConfig::default() }).unwrap();
    let target = views.iter().map(|v| v.target.max_value()).fold(0.0f32, f32::max);
    let got = views
        .iter()
        .map(|v| render(&r.scene, &v.camera).unwrap().max_value())
        .fold(0.0f32, f32::max);
    assert!(target > 32.0, "target peak {target}");
    assert!((got - target).abs() <= 0.25 * target, "rendered peak {got}, target {target}");
}
