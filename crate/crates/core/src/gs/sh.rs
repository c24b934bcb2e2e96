//! Real spherical harmonics up to degree 3, in the sign convention common to
//! Gaussian-splatting tools.

use crate::geom::Vec3;

pub const MAX_DEGREE: usize = 3;
pub const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Coefficients per color channel for degree `l`.
pub const fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree whose coefficient count is `n`, if any.
pub fn degree_for_count(n: usize) -> Option<usize> {
    (0..=MAX_DEGREE).find(|&l| coeff_count(l) == n)
}

/// DC coefficient giving constant radiance `v`.
pub fn dc_from_radiance(v: f64) -> f64 {
    v / C0
}

/// Basis values at unit direction `d`; entries past `coeff_count(degree)` are zero.
pub fn basis(degree: usize, d: Vec3) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (d.x, d.y, d.z);
    b[1] = -C1 * y;
    b[2] = C1 * z;
    b[3] = -C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    b[4] = C2[0] * x * y;
    b[5] = C2[1] * y * z;
    b[6] = C2[2] * (2.0 * zz - xx - yy);
    b[7] = C2[3] * x * z;
    b[8] = C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = C3[0] * y * (3.0 * xx - yy);
    b[10] = C3[1] * x * y * z;
    b[11] = C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = C3[5] * z * (xx - yy);
    b[15] = C3[6] * x * (xx - 3.0 * yy);
    b
}

/// Partial derivatives of each basis polynomial w.r.t. (x, y, z), treating
/// the components as independent.
pub fn basis_grad(degree: usize, d: Vec3) -> [[f64; 3]; 16] {
    let mut g = [[0.0; 3]; 16];
    if degree == 0 {
        return g;
    }
    let (x, y, z) = (d.x, d.y, d.z);
    g[1] = [0.0, -C1, 0.0];
    g[2] = [0.0, 0.0, C1];
    g[3] = [-C1, 0.0, 0.0];
    if degree == 1 {
        return g;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    g[4] = [C2[0] * y, C2[0] * x, 0.0];
    g[5] = [0.0, C2[1] * z, C2[1] * y];
    g[6] = [-2.0 * C2[2] * x, -2.0 * C2[2] * y, 4.0 * C2[2] * z];
    g[7] = [C2[3] * z, 0.0, C2[3] * x];
    g[8] = [2.0 * C2[4] * x, -2.0 * C2[4] * y, 0.0];
    if degree == 2 {
        return g;
    }
    g[9] = [C3[0] * 6.0 * x * y, C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
    g[10] = [C3[1] * y * z, C3[1] * x * z, C3[1] * x * y];
    g[11] = [
        C3[2] * (-2.0 * x * y),
        C3[2] * (4.0 * zz - xx - 3.0 * yy),
        C3[2] * 8.0 * y * z,
    ];
    g[12] = [
        C3[3] * (-6.0 * x * z),
        C3[3] * (-6.0 * y * z),
        C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
    ];
    g[13] = [
        C3[4] * (4.0 * zz - 3.0 * xx - yy),
        C3[4] * (-2.0 * x * y),
        C3[4] * 8.0 * x * z,
    ];
    g[14] = [C3[5] * 2.0 * x * z, C3[5] * (-2.0 * y * z), C3[5] * (xx - yy)];
    g[15] = [C3[6] * (3.0 * xx - 3.0 * yy), C3[6] * (-6.0 * x * y), 0.0];
    g
}

/// Unclamped RGB for coefficients laid out `[k][channel]`.
pub fn eval_raw(coeffs: &[[f64; 3]], d: Vec3) -> [f64; 3] {
    let degree = degree_for_count(coeffs.len()).expect("coefficient count is a square <= 16");
    let b = basis(degree, d);
    let mut out = [0.0; 3];
    for (k, c) in coeffs.iter().enumerate() {
        for ch in 0..3 {
            out[ch] += c[ch] * b[k];
        }
    }
    out
}

/// Radiance along `d`, clamped at zero.
pub fn eval(coeffs: &[[f64; 3]], d: Vec3) -> [f64; 3] {
    eval_raw(coeffs, d).map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::fibonacci_sphere;

    #[test]
    fn orthonormal_on_the_sphere() {
        // quadrature over many near-uniform points approximates the inner products
        let pts = fibonacci_sphere(20_000);
        let w = 4.0 * std::f64::consts::PI / pts.len() as f64;
        let mut gram = [[0.0; 16]; 16];
        for &p in &pts {
            let b = basis(3, p);
            for i in 0..16 {
                for j in 0..16 {
                    gram[i][j] += w * b[i] * b[j];
                }
            }
        }
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - want).abs() < 2e-3, "{i} {j} {}", gram[i][j]);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = Vec3::new(0.3, -0.5, 0.81);
        let g = basis_grad(3, d);
        let h = 1e-6;
        for axis in 0..3 {
            let mut a = d.to_array();
            let mut b = d.to_array();
            a[axis] += h;
            b[axis] -= h;
            let (pa, pb) = (basis(3, Vec3::from_array(a)), basis(3, Vec3::from_array(b)));
            for k in 0..16 {
                let fd = (pa[k] - pb[k]) / (2.0 * h);
                assert!((fd - g[k][axis]).abs() < 1e-6, "k {k} axis {axis}");
            }
        }
    }

    #[test]
    fn dc_only_is_constant() {
        let c = [[dc_from_radiance(2.5), dc_from_radiance(0.5), 0.0]];
        for d in fibonacci_sphere(10) {
            let v = eval(&c, d);
            assert!((v[0] - 2.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12 && v[2] == 0.0);
        }
    }
}
