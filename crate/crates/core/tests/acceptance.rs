//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line even when all of them pass.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gaslight::bracket::{expand_stack, ExpandLimits, OraclePredictor};
use gaslight::color::{auto_expose, delinearize, LinearImage, LogLumaStatistic, Transfer, DEFAULT_KEY};
use gaslight::geom::Vec3;
use gaslight::gs::fit::init_from_points;
use gaslight::gs::synthetic::{jittered_points, orbit_cameras, random_scene, render_views, SyntheticSpec};
use gaslight::gs::{fit, ply, rasterize, render, Camera, CameraView, FitConfig, Gaussian, GaussianScene, RasterSettings};
use gaslight::io::rgbe;
use gaslight::merge::{merge, weight, WeightProfile};
use gaslight::metrics::{align_exposure, angular_error, pu21, pu21_psnr, psnr, CompareOptions, Domain};
use gaslight::pano::{cubemap_to_equirect, equirect_pixel_dir, equirect_to_cubemap};
use gaslight::relight::{evaluate_pair, ibl_lookup, render as relight_render, trace, PartialIbl, SceneSpec, Surface};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 oracle round-trip", oracle_round_trip),
        ("2 merge weighting", merge_weighting),
        ("3 expansion termination", expansion_termination),
        ("4 renderer physics", renderer_physics),
        ("5 rasterizer gradients", rasterizer_gradients),
        ("6 splat self-reconstruction", self_reconstruction),
        ("7 clamped-view recovery", clamped_view_recovery),
        ("8 metric identities", metric_identities),
        ("9 format round-trips", format_round_trips),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{name}] {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

/// Smooth field of log2 luminance spanning `stops`, tinted per channel.
fn hdr_field(w: usize, h: usize, stops: f64, rng: &mut ChaCha8Rng) -> LinearImage {
    let (fx, fy, ph) = (rng.random_range(0.5..2.5), rng.random_range(0.5..2.5), rng.random_range(0.0..PI));
    let tint: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(0.6..1.0));
    let base = rng.random_range(-3.0..3.0);
    LinearImage::from_fn(w, h, move |x, y| {
        let (u, v) = (x as f64 / (w - 1) as f64, y as f64 / (h - 1) as f64);
        // (sin + sin) / 2 remapped to [0, 1], reaching both ends on this grid
        let s = 0.25 * ((2.0 * PI * fx * u + ph).sin() + (2.0 * PI * fy * v).sin()) + 0.5;
        let t = if x == 0 && y == 0 { 0.0 } else if x == w - 1 && y == h - 1 { 1.0 } else { s };
        let l = (base + stops * (t - 0.5)).exp2();
        tint.map(|c| (l * c) as f32)
    })
}

fn oracle_round_trip() -> Outcome {
    let start = Instant::now();
    let limits = ExpandLimits::default();
    let profile = WeightProfile::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scene = SceneSpec { width: 64, height: 64, samples: 256, ..SceneSpec::default() };
    let (mut worst_rel, mut worst_psnr) = (0.0f64, f64::INFINITY);
    let mut counted = 0usize;
    let n = 24;
    for k in 0..n {
        let stops = 4.0 + 8.0 * k as f64 / (n - 1) as f64;
        let raw = hdr_field(48, 32, stops, &mut rng);
        let gt = auto_expose(&raw, DEFAULT_KEY, LogLumaStatistic::GeometricMean).unwrap().image;
        let i0 = delinearize(&gt, Transfer::Gamma22);
        let exp = expand_stack(&i0, &mut OraclePredictor::new(gt.clone()), &limits).unwrap();
        let hdr = merge(&exp.stack, &profile).unwrap();
        for (idx, (&want, &got)) in gt.data().iter().zip(hdr.data()).enumerate() {
            let usable = exp.stack.entries().iter().any(|e| {
                let z = e.image.data()[idx];
                z > limits.sat_lo && z < limits.sat_hi
            });
            if usable {
                counted += 1;
                worst_rel = worst_rel.max(((got - want) / want).abs() as f64);
            }
        }
        let (report, _, _) = evaluate_pair(&hdr, &gt, &scene, &PartialIbl::new(gt.clone()), &CompareOptions::default()).unwrap();
        worst_psnr = worst_psnr.min(report.psnr);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_rel < 0.02 && worst_psnr > 40.0 && elapsed < Duration::from_secs(120) && counted > 0,
        format!("{n} images up to 2^12, max rel err {worst_rel:.2e} over {counted} samples, min relit PSNR {worst_psnr:.2} dB, {elapsed:.1?}"),
    )
}

fn merge_weighting() -> Outcome {
    let profile = WeightProfile::default();
    let mut mismatches = 0;
    for i in 0..=1000 {
        let z = (i as f64 * 1e-3) as f32;
        let hat = -2.0 * (z - 0.5).abs() + 1.0;
        let in_band = (0.2f32..=0.8).contains(&z);
        if weight(z, false, &profile) != hat {
            mismatches += 1;
        }
        if weight(z, true, &profile) != if in_band { 1.0 } else { hat } {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1001 grid points, {mismatches} mismatches"))
}

fn expansion_termination() -> Outcome {
    let limits = ExpandLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut dark, mut bright) = (0usize, 0usize);
    for _ in 0..20 {
        let raw = hdr_field(48, 32, 10.0, &mut rng);
        let gt = auto_expose(&raw, DEFAULT_KEY, LogLumaStatistic::GeometricMean).unwrap().image;
        let i0 = delinearize(&gt, Transfer::Gamma22);
        let e = expand_stack(&i0, &mut OraclePredictor::new(gt), &limits).unwrap();
        dark = dark.max(e.darker_steps);
        bright = bright.max(e.brighter_steps);
    }
    outcome(
        dark <= 6 && bright <= 6,
        format!("20 images at 2^10, worst {dark} darker / {bright} brighter steps (cap {})", limits.max_steps_per_side),
    )
}

fn renderer_physics() -> Outcome {
    let l = [0.7f32, 1.3, 4.0];
    let scene = SceneSpec {
        width: 64,
        height: 64,
        samples: 1024,
        plane_albedo: 1.0,
        cast_shadows: false,
        ..SceneSpec::default()
    };
    let r = relight_render(&scene, &PartialIbl::new(LinearImage::filled(4, 4, l)).with_outside(l)).unwrap();
    let mut furnace = 0.0f64;
    let mut plane = 0;
    for y in 0..scene.height {
        for x in 0..scene.width {
            if let Surface::Plane { .. } = trace(&scene, scene.camera_ray(x, y)) {
                plane += 1;
                let p = r.pixel(x, y);
                for c in 0..3 {
                    furnace = furnace.max(((p[c] - l[c]) / l[c]).abs() as f64);
                }
            }
        }
    }

    let env = LinearImage::from_fn(40, 40, |x, y| {
        let (u, v) = (x as f32 / 40.0, y as f32 / 40.0);
        [0.2 + 3.0 * u, 0.5 + v * v, 2.0 - u * v]
    });
    let ibl = PartialIbl::new(env).with_view(Vec3::new(0.0, 0.3, 1.0), Vec3::Y, 2.4);
    let mirror = SceneSpec { width: 64, height: 64, samples: 16, ..SceneSpec::default() };
    let r = relight_render(&mirror, &ibl).unwrap();
    let (mut worst, mut hits) = (0.0f64, 0);
    for y in 0..mirror.height {
        for x in 0..mirror.width {
            let d = mirror.camera_ray(x, y);
            // ray-sphere by the quadratic, independent of the renderer's trace
            let oc = mirror.camera_position - mirror.sphere_center;
            let b = oc.dot(d);
            let c = oc.dot(oc) - mirror.sphere_radius * mirror.sphere_radius;
            let disc = b * b - c;
            if disc < 1e-6 {
                continue;
            }
            let t = -b - disc.sqrt();
            let n = (mirror.camera_position + d * t - mirror.sphere_center) * (1.0 / mirror.sphere_radius);
            let refl = d - n * (2.0 * d.dot(n));
            let want = ibl_lookup(&ibl, refl.normalized());
            let got = r.pixel(x, y);
            for c in 0..3 {
                worst = worst.max(((want[c] - got[c]).abs() / want[c].abs().max(1e-3)) as f64);
            }
            hits += 1;
        }
    }
    outcome(
        furnace < 0.005 && plane > 100 && hits > 100 && worst < 1e-5,
        format!("furnace max dev {:.2e} over {plane} plane px at 1024 spp; mirror max rel dev {worst:.1e} over {hits} px", furnace),
    )
}

fn random_gaussian(rng: &mut ChaCha8Rng, degree: usize) -> Gaussian {
    let mut g = Gaussian::isotropic(
        Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
        0.0,
        rng.random_range(0.3..0.9),
        [0.0; 3],
        degree,
    );
    g.scale = [0, 1, 2].map(|_| rng.random_range(0.1..0.3));
    g.rotation = [0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0));
    for (k, c) in g.sh.iter_mut().enumerate() {
        *c = [0, 1, 2].map(|_| if k == 0 { rng.random_range(2.0..5.0) } else { rng.random_range(-0.3..0.3) });
    }
    g
}

fn l1(img: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = img.len() as f64;
    let loss = img.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let grad = img.iter().zip(target).map(|(a, b)| (a - b).signum() / n).collect();
    (loss, grad)
}

fn rasterizer_gradients() -> Outcome {
    let start = Instant::now();
    let settings = RasterSettings::default();
    let cam = Camera::look_at(Vec3::new(0.0, 0.0, -4.0), Vec3::ZERO, Vec3::Y, 0.6, 32, 32).unwrap();
    let eps = 1e-4;
    let (mut worst, mut checked) = (0.0f64, 0usize);
    let mut worst_at = String::new();
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let degree = rng.random_range(1..=3);
        let count = rng.random_range(1..=5);
        let gs: Vec<Gaussian> = (0..count).map(|_| random_gaussian(&mut rng, degree)).collect();
        let scene = GaussianScene::from_gaussians(degree, &gs).unwrap();
        let base = rasterize(&scene, &cam, &settings).unwrap();
        // targets sit 0.05 off the render so no pixel is near the L1 kink
        let target: Vec<f64> = base.image.iter().map(|v| v + if rng.random::<bool>() { 0.05 } else { -0.05 }).collect();
        let (_, dl) = l1(&base.image, &target);
        let grads = base.backward(&scene, &dl).unwrap().flat();
        let params = scene.flat();
        let mut probe = scene.clone();
        for (k, &p) in params.iter().enumerate() {
            let mut v = params.clone();
            v[k] = p + eps;
            probe.set_flat(&v);
            let lp = l1(&rasterize(&probe, &cam, &settings).unwrap().image, &target).0;
            v[k] = p - eps;
            probe.set_flat(&v);
            let lm = l1(&rasterize(&probe, &cam, &settings).unwrap().image, &target).0;
            let fd = (lp - lm) / (2.0 * eps);
            let rel = (fd - grads[k]).abs() / fd.abs().max(grads[k].abs()).max(1e-6);
            if rel > worst {
                worst = rel;
                worst_at = format!("trial {trial} param {k}: analytic {:.6e} fd {fd:.6e}", grads[k]);
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-3 && elapsed < Duration::from_secs(300),
        format!("100 trials, {checked} params, max rel err {worst:.2e} ({worst_at}), {elapsed:.1?}"),
    )
}

fn self_reconstruction() -> Outcome {
    let start = Instant::now();
    let truth = random_scene(&SyntheticSpec::default(), 1).unwrap();
    let cams = orbit_cameras(8, 3.0, 0.8, 0.9, 64, 64).unwrap();
    let views = render_views(&truth, &cams).unwrap();
    let init = init_from_points(&jittered_points(&truth, 0.05, 2), None, 1, 0.5).unwrap();
    let r = fit(&views, init, &FitConfig { iterations: 2000, ..FitConfig::default() }).unwrap();
    let (mut p, mut pu) = (f64::INFINITY, f64::INFINITY);
    for v in &views {
        let img = render(&r.scene, &v.camera).unwrap();
        p = p.min(psnr(&img, &v.target, Domain::Display).unwrap());
        pu = pu.min(pu21_psnr(&img, &v.target, pu21::DEFAULT_LUMINANCE_SCALE).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        p > 35.0 && pu > 30.0 && elapsed < Duration::from_secs(900),
        format!("{} gaussians, 8 views at 64x64, worst view PSNR {p:.2} dB, PU21-PSNR {pu:.2} dB, {elapsed:.1?}", truth.len()),
    )
}

fn clamped_view_recovery() -> Outcome {
    let spec = SyntheticSpec {
        count: 30,
        radiance_range: (0.05, 0.8),
        degree: 0,
        view_dependence: 0.0,
        ..SyntheticSpec::default()
    };
    let background = random_scene(&spec, 3).unwrap();
    let mut gs: Vec<Gaussian> = (0..background.len()).map(|i| background.gaussian(i)).collect();
    gs.push(Gaussian::isotropic(Vec3::new(0.0, 1.2, 0.0), 0.15, 0.95, [16.0 / 0.95; 3], 0));
    let mut truth = GaussianScene::from_gaussians(0, &gs).unwrap();
    let cams = orbit_cameras(8, 3.0, 0.8, 0.9, 64, 64).unwrap();
    // rescale the emitter so the brightest rendered pixel is exactly 16
    let peak = render_views(&truth, &cams).unwrap().iter().map(|v| v.target.max_value()).fold(0.0f32, f32::max);
    let last = gs.len() - 1;
    for c in gs[last].sh[0].iter_mut() {
        *c *= 16.0 / peak as f64;
    }
    truth = GaussianScene::from_gaussians(0, &gs).unwrap();
    let views: Vec<CameraView> = render_views(&truth, &cams)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if i % 2 == 1 {
                return v;
            }
            let clamped: Vec<f32> = v.target.data().iter().map(|x| x.min(1.0)).collect();
            CameraView::new(v.camera.clone(), LinearImage::new(64, 64, clamped).unwrap()).unwrap()
        })
        .collect();
    let peak = views.iter().skip(1).step_by(2).map(|v| v.target.max_value()).fold(0.0f32, f32::max);
    let init = init_from_points(&jittered_points(&truth, 0.05, 2), None, 1, 0.5).unwrap();
    let r = fit(&views, init, &FitConfig { iterations: 1000, ..FitConfig::default() }).unwrap();
    let maxima: Vec<f32> = views.iter().step_by(2).map(|v| render(&r.scene, &v.camera).unwrap().max_value()).collect();
    let worst = maxima.iter().copied().fold(f32::INFINITY, f32::min);
    outcome(
        worst > 1.5,
        format!("unclamped peak {peak:.2}, clamped-pose render maxima {maxima:.2?}, min {worst:.2}"),
    )
}

fn metric_identities() -> Outcome {
    let gt = LinearImage::from_fn(32, 32, |x, y| {
        let (u, v) = (x as f32 / 31.0, y as f32 / 31.0);
        [0.01 + 2.0 * u * v, 0.05 + u, 0.3 + 0.5 * v]
    });
    let mut ang = 0.0f64;
    for c in [0.25f32, 0.7, 1.0, 3.3, 64.0] {
        ang = ang.max(angular_error(&gt.scaled(c), &gt).unwrap());
    }
    let mut scale_err = 0.0f64;
    for k in -8..=8 {
        let a = align_exposure(&gt.scaled((k as f32).exp2()), &gt).unwrap();
        scale_err = scale_err.max((a.scale - (-k as f64).exp2()).abs() / (-k as f64).exp2());
    }
    let n = 10_000;
    let (lo, hi) = (pu21::L_MIN.ln(), pu21::L_MAX.ln());
    let enc: Vec<f64> = (0..n).map(|i| pu21::encode_luminance((lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())).collect();
    let monotone = enc.windows(2).all(|w| w[1] > w[0]);
    // f32 scaling and the acos near 1 leave a residue around 1e-6 degrees
    outcome(
        ang < 1e-4 && scale_err < 1e-6 && monotone,
        format!("angular err {ang:.1e} deg, alignment scale rel err {scale_err:.1e}, PU21 strictly increasing on {n} points: {monotone}"),
    )
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gs: Vec<Gaussian> = (0..200).map(|_| random_gaussian(&mut rng, 3)).collect();
    let scene = GaussianScene::from_gaussians(3, &gs).unwrap();
    let bytes = ply::to_bytes(&scene);
    let back = ply::read(bytes.as_slice()).unwrap();
    let ply_ok = ply::to_bytes(&back) == bytes && ply::read(ply::to_bytes(&back).as_slice()).unwrap() == back;

    let hdr = LinearImage::from_fn(64, 48, |x, y| {
        let mut r = ChaCha8Rng::seed_from_u64((y * 64 + x) as u64);
        [0, 1, 2].map(|_| (r.random_range(-12.0f32..12.0)).exp2())
    });
    let mut buf = Vec::new();
    rgbe::write(&hdr, &mut buf).unwrap();
    let dec = rgbe::read(buf.as_slice()).unwrap();
    // RGBE shares one exponent, so error is bounded relative to the pixel's largest channel
    let mut rgbe_err = 0.0f64;
    for (a, b) in hdr.pixels().zip(dec.pixels()) {
        let m = a.iter().copied().fold(0.0f32, f32::max);
        for c in 0..3 {
            rgbe_err = rgbe_err.max(((a[c] - b[c]).abs() / m) as f64);
        }
    }

    let (w, h) = (256, 128);
    let pano = LinearImage::from_fn(w, h, |x, y| {
        let d = equirect_pixel_dir(x, y, w, h);
        [(0.5 + 0.4 * d.x) as f32, (0.5 + 0.3 * d.y * d.z) as f32, (0.4 + 0.2 * (d.x * d.y + d.z)) as f32]
    });
    let cube = equirect_to_cubemap(&pano, h / 2).unwrap();
    let again = cubemap_to_equirect(&cube, w).unwrap();
    let cube_psnr = psnr(&again, &pano, Domain::Linear).unwrap();

    outcome(
        ply_ok && rgbe_err < 0.01 && cube_psnr > 40.0,
        format!("PLY bitwise stable: {ply_ok}; RGBE max rel err {rgbe_err:.2e}; cube-map PSNR {cube_psnr:.2} dB"),
    )
}
