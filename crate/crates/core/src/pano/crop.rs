use rayon::prelude::*;

use super::{check_equirect, sample_equirect, PanoSample};
use crate::color::{
    apply_exposure, auto_expose, delinearize, DisplayImage, ExposureValue, LinearImage,
    LogLumaStatistic, DEFAULT_KEY,
};
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

/// Camera-to-world rotation: yaw about +Y, then pitch up, then roll about the view axis.
/// The camera looks down +Z with +Y up.
pub fn camera_rotation(azimuth: f64, elevation: f64, roll: f64) -> Mat3 {
    Mat3::rot_y(azimuth) * Mat3::rot_x(-elevation) * Mat3::rot_z(roll)
}

/// Pinhole projection of a panorama with a given camera rotation.
pub fn perspective_project(
    pano: &LinearImage,
    rotation: &Mat3,
    vfov: f64,
    out_w: usize,
    out_h: usize,
) -> Result<LinearImage> {
    check_equirect(pano.dims())?;
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("crop dimensions must be positive"));
    }
    if !(vfov > 0.0 && vfov < std::f64::consts::PI) {
        return Err(Error::invalid(format!("vfov {vfov} outside (0, pi)")));
    }
    let (pw, ph) = pano.dims();
    let tan_v = (vfov * 0.5).tan();
    let tan_h = tan_v * out_w as f64 / out_h as f64;
    let mut data = vec![0.0f32; out_w * out_h * 3];
    data.par_chunks_mut(out_w * 3).enumerate().for_each(|(j, row)| {
        for i in 0..out_w {
            let a = (2.0 * (i as f64 + 0.5) / out_w as f64 - 1.0) * tan_h;
            let b = (1.0 - 2.0 * (j as f64 + 0.5) / out_h as f64) * tan_v;
            // camera right is -X when looking down +Z with +Y up
            let cam = Vec3::new(-a, b, 1.0).normalized();
            let d = rotation.mul_vec(cam);
            row[i * 3..i * 3 + 3].copy_from_slice(&sample_equirect(pano.data(), pw, ph, d));
        }
    });
    LinearImage::new(out_w, out_h, data)
}

/// Auto-exposes the panorama to the 0.17 key, projects the crop described by
/// `s`, and applies the crop's exposure offset.
pub fn pano_to_perspective(
    pano: &LinearImage,
    s: &PanoSample,
    out_w: usize,
    out_h: usize,
) -> Result<LinearImage> {
    check_equirect(pano.dims())?;
    let exposed = auto_expose(pano, DEFAULT_KEY, LogLumaStatistic::GeometricMean)?.image;
    let rot = camera_rotation(s.azimuth, s.elevation, s.roll);
    let crop = perspective_project(&exposed, &rot, s.vfov, out_w, out_h)?;
    Ok(apply_exposure(&crop, ExposureValue(s.exposure_ev)))
}

/// The display-space training crop: projection, exposure, then the sample's tonemap.
pub fn render_crop(pano: &LinearImage, s: &PanoSample, out_w: usize, out_h: usize) -> Result<DisplayImage> {
    Ok(delinearize(&pano_to_perspective(pano, s, out_w, out_h)?, s.transfer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Transfer;
    use crate::pano::equirect_coords;
    use std::f64::consts::PI;

    fn sample(az: f64, el: f64, vfov_deg: f64, ev: f64) -> PanoSample {
        PanoSample {
            azimuth: az,
            elevation: el,
            roll: 0.0,
            vfov: vfov_deg.to_radians(),
            exposure_ev: ev,
            transfer: Transfer::Gamma22,
        }
    }

    #[test]
    fn constant_pano_gives_constant_crop() {
        let pano = LinearImage::filled(64, 32, [0.17, 0.17, 0.17]);
        let crop = pano_to_perspective(&pano, &sample(1.0, 0.3, 90.0, 2.0), 16, 12).unwrap();
        // luminance of (0.17,0.17,0.17) is 0.17, so auto exposure is the identity
        for v in crop.data() {
            assert!((v - 0.68).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn center_pixel_samples_forward_direction() {
        let pano = LinearImage::from_fn(64, 32, |x, y| [x as f32, y as f32, 1.0]);
        let crop = perspective_project(&pano, &camera_rotation(0.0, 0.0, 0.0), 1.2, 9, 9).unwrap();
        // oracle: the +Z direction lands at continuous (32, 16), a texel corner
        let (u, v) = equirect_coords(Vec3::Z, 64, 32);
        assert_eq!((u, v), (32.0, 16.0));
        let expect = crate::pano::bilinear(pano.data(), 64, 32, u, v, true);
        assert_eq!(crop.pixel(4, 4), expect);
    }

    #[test]
    fn elevation_and_azimuth_turn_the_view() {
        let r = camera_rotation(PI / 2.0, 0.0, 0.0);
        assert!((r.mul_vec(Vec3::Z) - Vec3::X).length() < 1e-12);
        let r = camera_rotation(0.0, PI / 4.0, 0.0);
        let f = r.mul_vec(Vec3::Z);
        assert!(f.y > 0.7 && f.z > 0.7);
    }

    #[test]
    fn opposite_crops_never_share_a_texel() {
        let (w, h) = (128, 64);
        for tx in [5usize, 40, 64, 100] {
            let mut pano = LinearImage::zeros(w, h);
            pano.set_pixel(tx, 32, [1000.0; 3]);
            for az in [0.0, 0.7, 2.0] {
                let mut seen = 0;
                for a in [az, az + PI] {
                    let crop = perspective_project(&pano, &camera_rotation(a, 0.0, 0.0), 120f64.to_radians(), 48, 48).unwrap();
                    if crop.max_value() > 0.0 {
                        seen += 1;
                    }
                }
                assert!(seen <= 1, "texel {tx} seen by both crops at az {az}");
            }
        }
    }

    #[test]
    fn rejects_non_equirect() {
        let pano = LinearImage::zeros(30, 20);
        assert!(pano_to_perspective(&pano, &sample(0.0, 0.0, 90.0, 0.0), 8, 8).is_err());
    }
}
