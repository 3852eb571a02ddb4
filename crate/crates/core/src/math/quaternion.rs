//! Hamilton quaternions, scalar first.

use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Quaternion `w + xi + yj + zk` in the Hamilton convention.
///
/// Attitudes are stored as body-to-world rotations. `q` and `-q` describe the
/// same rotation; [`Quaternion::error_vec`] resolves that ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: &Vector3<f64>) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    pub fn from_vector4(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector4(self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis * (s / n);
        Self::new(c, a.x, a.y, a.z)
    }

    /// Exponential map from a rotation vector `eta` (radians) to a unit quaternion.
    pub fn exp_map(eta: &Vector3<f64>) -> Self {
        let angle = eta.norm();
        if angle < 1e-12 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = eta * (s / angle);
        Self::new(c, a.x, a.y, a.z)
    }

    pub fn vec(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm_squared(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Multiplicative inverse; equals the conjugate for unit quaternions.
    pub fn inverse(&self) -> Self {
        let n2 = self.norm_squared();
        let c = self.conjugate();
        Self::new(c.w / n2, c.x / n2, c.y / n2, c.z / n2)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Representative with non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Vector part of `self ⊗ reference⁻¹`, sign-canonicalized so that the
    /// short-way rotation is reported. Zero iff both describe the same rotation.
    pub fn error_vec(&self, reference: &Quaternion) -> Vector3<f64> {
        (*self * reference.conjugate()).canonical().vec()
    }

    /// Rotation matrix (body to world). Valid for unit quaternions.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotates a body-frame vector into the world frame.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        (*self * Quaternion::pure(v) * self.conjugate()).vec()
    }

    /// Rotates a world-frame vector into the body frame.
    pub fn inverse_rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        (self.conjugate() * Quaternion::pure(v) * *self).vec()
    }

    /// Third column of the rotation matrix: the body z-axis in world frame.
    /// Written as a polynomial in the components so it stays differentiable
    /// off the unit sphere.
    pub fn body_z(&self) -> Vector3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Vector3::new(
            2.0 * (x * z + w * y),
            2.0 * (y * z - w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Matrix `L(q)` with `q ⊗ p = L(q) p`.
    pub fn left_matrix(&self) -> Matrix4<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix4::new(
            w, -x, -y, -z, //
            x, w, -z, y, //
            y, z, w, -x, //
            z, -y, x, w,
        )
    }

    /// Matrix `R(p)` with `q ⊗ p = R(p) q`.
    pub fn right_matrix(&self) -> Matrix4<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix4::new(
            w, -x, -y, -z, //
            x, w, z, -y, //
            y, -z, w, x, //
            z, y, -x, w,
        )
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = self.canonical();
        2.0 * c.vec().norm().atan2(c.w)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product `a ⊗ b`.
pub fn quat_multiply(a: &Quaternion, b: &Quaternion) -> Quaternion {
    *a * *b
}

/// `vec(q ⊗ q_ref⁻¹)` with the scalar part forced non-negative.
pub fn quat_error_vec(q: &Quaternion, q_ref: &Quaternion) -> Vector3<f64> {
    q.error_vec(q_ref)
}

pub fn quat_exp_map(eta: &Vector3<f64>) -> Quaternion {
    Quaternion::exp_map(eta)
}
