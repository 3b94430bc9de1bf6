//! Scalar-last quaternion algebra for body orientation.
//!
//! Convention: `q = (x, y, z, w)` with `w` the scalar part, matching the
//! column ordering `[q_x, q_y, q_z, q_w]` used by the rate matrix below.
//! `q` and `-q` represent the same rotation (double cover).

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Unit-norm tolerance accepted by operations that require a rotation.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Orientation quaternion, scalar last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    /// Rotation of `angle` radians about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-12 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let u = axis / n;
        Self::new(u.x * s, u.y * s, u.z * s, c)
    }

    pub fn from_vector(v: Vector4<f64>) -> Self {
        Self::new(v.x, v.y, v.z, v.w)
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, self.w)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.as_vector().dot(&other.as_vector())
    }

    /// Unit-norm copy; norm is within 1e-9 of one afterwards.
    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n, self.w / n)
    }

    pub fn negated(&self) -> Quat {
        Self::new(-self.x, -self.y, -self.z, -self.w)
    }

    /// Yaw (rotation about world z) of the represented orientation, radians.
    pub fn yaw(&self) -> f64 {
        let q = self.normalized();
        (2.0 * (q.w * q.z + q.x * q.y)).atan2(1.0 - 2.0 * (q.y * q.y + q.z * q.z))
    }

    /// Spherical linear interpolation, shortest arc, `t` in [0, 1].
    pub fn slerp(&self, other: &Quat, t: f64) -> Quat {
        let a = self.normalized();
        let mut b = other.normalized();
        let mut d = a.dot(&b);
        if d < 0.0 {
            b = b.negated();
            d = -d;
        }
        if d > 1.0 - 1e-10 {
            // Nearly parallel: linear blend then renormalize.
            return Quat::from_vector(a.as_vector().lerp(&b.as_vector(), t)).normalized();
        }
        let theta = d.acos();
        let s = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Quat::from_vector(wa * a.as_vector() + wb * b.as_vector())
    }
}

/// Rotation matrix of a unit quaternion (world from body).
///
/// Errors with `NonUnitQuaternion` when `‖q‖` deviates from one by more
/// than `UNIT_NORM_TOL`.
pub fn quat_to_rot(q: &Quat) -> Result<Matrix3<f64>, ModelError> {
    let n = q.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(ModelError::NonUnitQuaternion { norm: n });
    }
    Ok(rot_unchecked(q))
}

/// Rotation matrix without the unit-norm check; callers must normalize first.
pub(crate) fn rot_unchecked(q: &Quat) -> Matrix3<f64> {
    let (x, y, z, w) = (q.x, q.y, q.z, q.w);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * x * y - 2.0 * w * z,
        2.0 * w * y + 2.0 * x * z,
        2.0 * x * y + 2.0 * w * z,
        1.0 - 2.0 * (x * x + z * z),
        2.0 * y * z - 2.0 * w * x,
        2.0 * x * z - 2.0 * w * y,
        2.0 * w * x + 2.0 * y * z,
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Quaternion rate `q̇ = ½ q ∘ ω` for body angular velocity `ω` (world frame),
/// returned as the 4-vector `(q̇_x, q̇_y, q̇_z, q̇_w)`.
///
/// Equals `Q(q)·ω` for the 4×3 rate matrix
///
/// ```text
///          ⎡  q_w  -q_z   q_y ⎤
/// Q(q) = ½ ⎢  q_z   q_w  -q_x ⎥
///          ⎢ -q_y   q_x   q_w ⎥
///          ⎣ -q_x  -q_y  -q_z ⎦
/// ```
pub fn quat_rate(q: &Quat, omega: &Vector3<f64>) -> Vector4<f64> {
    let (x, y, z, w) = (q.x, q.y, q.z, q.w);
    0.5 * Vector4::new(
        w * omega.x - z * omega.y + y * omega.z,
        z * omega.x + w * omega.y - x * omega.z,
        -y * omega.x + x * omega.y + w * omega.z,
        -x * omega.x - y * omega.y - z * omega.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat {
        loop {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if q.norm() > 1e-3 {
                return q.normalized();
            }
        }
    }

    #[test]
    fn identity_quaternion_gives_identity_matrix() {
        let r = quat_to_rot(&Quat::IDENTITY).unwrap();
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn yaw_90_matches_hand_substitution() {
        // (0, 0, √½, √½) substituted into the rotation formula.
        let s = 0.5f64.sqrt();
        let r = quat_to_rot(&Quat::new(0.0, 0.0, s, s)).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_orthonormal_with_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let r = quat_to_rot(&q).unwrap();
            assert_relative_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn double_cover_maps_to_same_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let q = random_unit_quat(&mut rng);
            let r1 = quat_to_rot(&q).unwrap();
            let r2 = quat_to_rot(&q.negated()).unwrap();
            assert_relative_eq!(r1, r2, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let q = Quat::new(0.0, 0.0, 0.0, 1.01);
        assert!(matches!(
            quat_to_rot(&q),
            Err(ModelError::NonUnitQuaternion { .. })
        ));
    }

    #[test]
    fn rate_at_identity_pure_yaw() {
        let qd = quat_rate(&Quat::IDENTITY, &Vector3::new(0.0, 0.0, PI));
        assert_relative_eq!(qd, Vector4::new(0.0, 0.0, PI / 2.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rate_is_zero_for_zero_angular_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let q = random_unit_quat(&mut rng);
            assert_eq!(quat_rate(&q, &Vector3::zeros()), Vector4::zeros());
        }
    }

    #[test]
    fn rate_is_orthogonal_to_quaternion() {
        // d/dt ‖q‖² = 2 q·q̇ = 0 for all q, ω.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let w = Vector3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            );
            assert_relative_eq!(q.as_vector().dot(&quat_rate(&q, &w)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_restores_unit_norm() {
        let q = Quat::new(0.3, -0.4, 0.5, 2.0).normalized();
        assert!((q.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Quat::IDENTITY;
        let b = Quat::from_axis_angle(Vector3::z(), FRAC_PI_2);
        assert_relative_eq!(a.slerp(&b, 0.0).as_vector(), a.as_vector(), epsilon = 1e-12);
        assert_relative_eq!(a.slerp(&b, 1.0).as_vector(), b.as_vector(), epsilon = 1e-12);
        let mid = a.slerp(&b, 0.5);
        let expected = Quat::from_axis_angle(Vector3::z(), FRAC_PI_2 / 2.0);
        assert_relative_eq!(mid.as_vector(), expected.as_vector(), epsilon = 1e-12);
    }

    #[test]
    fn yaw_extraction() {
        let q = Quat::from_axis_angle(Vector3::z(), 1.2);
        assert_relative_eq!(q.yaw(), 1.2, epsilon = 1e-12);
    }
}
