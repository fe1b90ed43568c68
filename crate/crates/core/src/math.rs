//! Quaternion, activation, and spherical-harmonics math shared across modules.
//!
//! Quaternions are stored as `[w, x, y, z]` vectors. Conversions normalize
//! internally via the homogeneous form `R = M(q) / |q|^2`, so gradients taken
//! with respect to the raw (possibly non-unit) components already include the
//! normalization chain.

use crate::scalar::Real;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector4};

pub const QUAT_IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

/// Quadratic (unnormalized) rotation form; `R = m_form(q) / |q|^2`.
fn m_form<T: Real>(q: &Vector4<T>) -> Matrix3<T> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = T::c(2.0);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        two * (x * y - w * z),
        two * (x * z + w * y),
        two * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        two * (y * z - w * x),
        two * (x * z - w * y),
        two * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Rotation matrix of the normalized quaternion.
pub fn quat_to_matrix<T: Real>(q: &Vector4<T>) -> Matrix3<T> {
    let n2 = q.norm_squared();
    m_form(q) / n2
}

/// Rotation matrix plus partial derivatives with respect to the four raw
/// quaternion components (normalization included).
pub fn quat_to_matrix_with_grad<T: Real>(q: &Vector4<T>) -> (Matrix3<T>, [Matrix3<T>; 4]) {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = T::c(2.0);
    let n2 = q.norm_squared();
    let rot = m_form(q) / n2;

    let dm = [
        Matrix3::new(
            two * w, -two * z, two * y, //
            two * z, two * w, -two * x, //
            -two * y, two * x, two * w,
        ),
        Matrix3::new(
            two * x, two * y, two * z, //
            two * y, -two * x, -two * w, //
            two * z, two * w, -two * x,
        ),
        Matrix3::new(
            -two * y, two * x, two * w, //
            two * x, two * y, two * z, //
            -two * w, two * z, -two * y,
        ),
        Matrix3::new(
            -two * z, -two * w, two * x, //
            two * w, -two * z, two * y, //
            two * x, two * y, two * z,
        ),
    ];

    let mut grads = [Matrix3::zeros(); 4];
    for k in 0..4 {
        grads[k] = (dm[k] - rot * (two * q[k])) / n2;
    }
    (rot, grads)
}

/// Quaternion `[w,x,y,z]` of a rotation matrix (delegates to nalgebra).
pub fn matrix_to_quat<T: Real>(m: &Matrix3<T>) -> Vector4<T> {
    let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m));
    let c = uq.quaternion();
    Vector4::new(c.w, c.i, c.j, c.k)
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Inverse of `sigmoid` on (0,1).
#[inline]
pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

pub const MAX_SH_DEGREE: usize = 3;

/// Coefficient count for an SH degree.
pub const fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree for a coefficient count, if it is one of the supported layouts.
pub fn sh_degree_from_count(count: usize) -> Option<usize> {
    (0..=MAX_SH_DEGREE).find(|&d| sh_coeff_count(d) == count)
}

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Real SH basis values at a unit direction, written into `out[..count]`.
pub fn sh_basis<T: Real>(degree: usize, dir: &Vector3<T>, out: &mut [T; 16]) {
    let (x, y, z) = (dir[0], dir[1], dir[2]);
    out[0] = T::c(SH_C0);
    if degree >= 1 {
        let c1 = T::c(SH_C1);
        out[1] = -c1 * y;
        out[2] = c1 * z;
        out[3] = -c1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out[4] = T::c(SH_C2[0]) * x * y;
        out[5] = T::c(SH_C2[1]) * y * z;
        out[6] = T::c(SH_C2[2]) * (T::c(2.0) * zz - xx - yy);
        out[7] = T::c(SH_C2[3]) * x * z;
        out[8] = T::c(SH_C2[4]) * (xx - yy);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out[9] = T::c(SH_C3[0]) * y * (T::c(3.0) * xx - yy);
        out[10] = T::c(SH_C3[1]) * x * y * z;
        out[11] = T::c(SH_C3[2]) * y * (T::c(4.0) * zz - xx - yy);
        out[12] = T::c(SH_C3[3]) * z * (T::c(2.0) * zz - T::c(3.0) * xx - T::c(3.0) * yy);
        out[13] = T::c(SH_C3[4]) * x * (T::c(4.0) * zz - xx - yy);
        out[14] = T::c(SH_C3[5]) * z * (xx - yy);
        out[15] = T::c(SH_C3[6]) * x * (xx - T::c(3.0) * yy);
    }
}

/// SH basis values plus their gradients with respect to the direction
/// components (direction treated as three free variables).
pub fn sh_basis_with_grad<T: Real>(
    degree: usize,
    dir: &Vector3<T>,
    out: &mut [T; 16],
    grad: &mut [Vector3<T>; 16],
) {
    sh_basis(degree, dir, out);
    let (x, y, z) = (dir[0], dir[1], dir[2]);
    let zero = T::zero();
    grad[0] = Vector3::zeros();
    if degree >= 1 {
        let c1 = T::c(SH_C1);
        grad[1] = Vector3::new(zero, -c1, zero);
        grad[2] = Vector3::new(zero, zero, c1);
        grad[3] = Vector3::new(-c1, zero, zero);
    }
    if degree >= 2 {
        let two = T::c(2.0);
        let four = T::c(4.0);
        let c20 = T::c(SH_C2[0]);
        let c21 = T::c(SH_C2[1]);
        let c22 = T::c(SH_C2[2]);
        let c23 = T::c(SH_C2[3]);
        let c24 = T::c(SH_C2[4]);
        grad[4] = Vector3::new(c20 * y, c20 * x, zero);
        grad[5] = Vector3::new(zero, c21 * z, c21 * y);
        grad[6] = Vector3::new(-two * c22 * x, -two * c22 * y, four * c22 * z);
        grad[7] = Vector3::new(c23 * z, zero, c23 * x);
        grad[8] = Vector3::new(two * c24 * x, -two * c24 * y, zero);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let two = T::c(2.0);
        let three = T::c(3.0);
        let four = T::c(4.0);
        let six = T::c(6.0);
        let eight = T::c(8.0);
        let c = SH_C3.map(T::c);
        grad[9] = Vector3::new(six * c[0] * x * y, c[0] * (three * xx - three * yy), zero);
        grad[10] = Vector3::new(c[1] * y * z, c[1] * x * z, c[1] * x * y);
        grad[11] = Vector3::new(
            -two * c[2] * x * y,
            c[2] * (four * zz - xx - three * yy),
            eight * c[2] * y * z,
        );
        grad[12] = Vector3::new(
            -six * c[3] * x * z,
            -six * c[3] * y * z,
            c[3] * (six * zz - three * xx - three * yy),
        );
        grad[13] = Vector3::new(
            c[4] * (four * zz - three * xx - yy),
            -two * c[4] * x * y,
            eight * c[4] * x * z,
        );
        grad[14] = Vector3::new(two * c[5] * x * z, -two * c[5] * y * z, c[5] * (xx - yy));
        grad[15] = Vector3::new(c[6] * (three * xx - three * yy), -six * c[6] * x * y, zero);
    }
}
