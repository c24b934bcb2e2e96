use rayon::prelude::*;

use super::{bilinear, check_equirect, equirect_pixel_dir, sample_equirect, RgbPlane};
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeFace {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl CubeFace {
    /// Storage order of faces in a [`CubeMap`].
    pub const ALL: [CubeFace; 6] = [
        CubeFace::PosX,
        CubeFace::NegX,
        CubeFace::PosY,
        CubeFace::NegY,
        CubeFace::PosZ,
        CubeFace::NegZ,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["px", "nx", "py", "ny", "pz", "nz"][self.index()]
    }

    /// (forward, right, up). Right is `forward x up`, matching the crop camera.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        let (f, up) = match self {
            CubeFace::PosX => (Vec3::X, Vec3::Y),
            CubeFace::NegX => (-Vec3::X, Vec3::Y),
            CubeFace::PosY => (Vec3::Y, -Vec3::Z),
            CubeFace::NegY => (-Vec3::Y, Vec3::Z),
            CubeFace::PosZ => (Vec3::Z, Vec3::Y),
            CubeFace::NegZ => (-Vec3::Z, Vec3::Y),
        };
        (f, f.cross(up), up)
    }

    /// The face a direction exits through.
    pub fn for_direction(d: Vec3) -> CubeFace {
        let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
        if ax >= ay && ax >= az {
            if d.x >= 0.0 {
                CubeFace::PosX
            } else {
                CubeFace::NegX
            }
        } else if ay >= az {
            if d.y >= 0.0 {
                CubeFace::PosY
            } else {
                CubeFace::NegY
            }
        } else if d.z >= 0.0 {
            CubeFace::PosZ
        } else {
            CubeFace::NegZ
        }
    }

    /// Direction through continuous face coordinates `(u, v)` on an `n`-pixel face.
    pub fn dir(self, u: f64, v: f64, n: usize) -> Vec3 {
        let (f, r, up) = self.basis();
        let a = 2.0 * u / n as f64 - 1.0;
        let b = 1.0 - 2.0 * v / n as f64;
        (f + r * a + up * b).normalized()
    }

    /// Continuous face coordinates of a direction belonging to this face.
    pub fn coords(self, d: Vec3, n: usize) -> (f64, f64) {
        let (f, r, up) = self.basis();
        let depth = d.dot(f);
        let a = d.dot(r) / depth;
        let b = d.dot(up) / depth;
        ((a + 1.0) * 0.5 * n as f64, (1.0 - b) * 0.5 * n as f64)
    }
}

/// Six square faces in `+X, -X, +Y, -Y, +Z, -Z` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeMap<I> {
    faces: Vec<I>,
}

impl<I: RgbPlane> CubeMap<I> {
    pub fn new(faces: Vec<I>) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::invalid(format!("cube map needs 6 faces, got {}", faces.len())));
        }
        let dims = faces[0].dims();
        if dims.0 != dims.1 || dims.0 == 0 {
            return Err(Error::invalid(format!("cube faces must be square, got {dims:?}")));
        }
        if faces.iter().any(|f| f.dims() != dims) {
            return Err(Error::invalid("cube faces differ in size"));
        }
        Ok(Self { faces })
    }

    pub fn face_size(&self) -> usize {
        self.faces[0].dims().0
    }

    pub fn face(&self, f: CubeFace) -> &I {
        &self.faces[f.index()]
    }

    pub fn faces(&self) -> &[I] {
        &self.faces
    }

    pub fn into_faces(self) -> Vec<I> {
        self.faces
    }

    /// Bilinear lookup within the face hit by `d`; edges clamp, no cross-face blending.
    pub fn sample(&self, d: Vec3) -> [f32; 3] {
        let face = CubeFace::for_direction(d);
        let n = self.face_size();
        let (u, v) = face.coords(d, n);
        bilinear(self.faces[face.index()].samples(), n, n, u, v, false)
    }

    pub fn map_faces<J: RgbPlane>(self, f: impl FnMut(CubeFace, I) -> Result<J>) -> Result<CubeMap<J>> {
        let mut f = f;
        let faces = CubeFace::ALL
            .into_iter()
            .zip(self.faces)
            .map(|(face, img)| f(face, img))
            .collect::<Result<Vec<_>>>()?;
        CubeMap::new(faces)
    }
}

/// Six 90-degree faces resampled bilinearly from an equirect panorama.
pub fn equirect_to_cubemap<I: RgbPlane>(pano: &I, face_size: usize) -> Result<CubeMap<I>> {
    check_equirect(pano.dims())?;
    if face_size == 0 {
        return Err(Error::invalid("face size must be positive"));
    }
    let (pw, ph) = pano.dims();
    let n = face_size;
    let faces = CubeFace::ALL
        .iter()
        .map(|&face| {
            let mut data = vec![0.0f32; n * n * 3];
            data.par_chunks_mut(n * 3).enumerate().for_each(|(j, row)| {
                for i in 0..n {
                    let d = face.dir(i as f64 + 0.5, j as f64 + 0.5, n);
                    row[i * 3..i * 3 + 3].copy_from_slice(&sample_equirect(pano.samples(), pw, ph, d));
                }
            });
            pano.with_samples(n, n, data)
        })
        .collect();
    CubeMap::new(faces)
}

/// Equirect panorama of width `out_w` (height `out_w / 2`) resampled from the cube.
pub fn cubemap_to_equirect<I: RgbPlane>(cube: &CubeMap<I>, out_w: usize) -> Result<I> {
    if out_w < 2 || out_w % 2 != 0 {
        return Err(Error::invalid(format!("equirect width must be even and >= 2, got {out_w}")));
    }
    let out_h = out_w / 2;
    let mut data = vec![0.0f32; out_w * out_h * 3];
    data.par_chunks_mut(out_w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..out_w {
            let d = equirect_pixel_dir(x, y, out_w, out_h);
            row[x * 3..x * 3 + 3].copy_from_slice(&cube.sample(d));
        }
    });
    Ok(cube.faces[0].with_samples(out_w, out_h, data))
}
