//! Rotation and pose algebra shared by the plant, filter and planner.
//!
//! Quaternions are Hamilton, scalar-first, and always kept in the canonical
//! hemisphere `w >= 0`. Euler angles use the Z-Y-X (yaw, pitch, roll) order so
//! that `R = Rz(yaw) * Ry(pitch) * Rx(roll)` maps body vectors into the
//! inertial frame.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch values closer than this to ±π/2 are rejected by [`euler_to_rotation`].
pub const GIMBAL_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub const fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Normalizes and canonicalizes the given components.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::NumericInput("quaternion components"));
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n }.canonical())
    }

    fn canonical(self) -> Self {
        let n = self.norm();
        let s = if self.w < 0.0 { -1.0 / n } else { 1.0 / n };
        Self { w: self.w * s, x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-15 {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn exp(rotvec: &Vector3<f64>) -> Self {
        let angle = rotvec.norm();
        let half = 0.5 * angle;
        // sin(x/2)/x, series near zero
        let k = if angle < 1e-8 { 0.5 - angle * angle / 48.0 } else { half.sin() / angle };
        Self { w: half.cos(), x: rotvec.x * k, y: rotvec.y * k, z: rotvec.z * k }.canonical()
    }

    /// Logarithm map: the rotation vector with angle in `[0, π]`.
    pub fn log(&self) -> Vector3<f64> {
        let v = self.vector();
        let s = v.norm();
        if s < 1e-12 {
            // 2 * v / w to second order
            return v * (2.0 / self.w.max(1e-300));
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    pub fn angle(&self) -> f64 {
        self.log().norm()
    }

    pub fn inverse(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
        .canonical()
    }

    pub fn to_rotation(&self) -> Matrix3<f64> {
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

    /// Converts a proper orthogonal matrix (Shepperd's method).
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self {
                w: 0.25 * s,
                x: (r[(2, 1)] - r[(1, 2)]) / s,
                y: (r[(0, 2)] - r[(2, 0)]) / s,
                z: (r[(1, 0)] - r[(0, 1)]) / s,
            }
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            Self {
                w: (r[(2, 1)] - r[(1, 2)]) / s,
                x: 0.25 * s,
                y: (r[(0, 1)] + r[(1, 0)]) / s,
                z: (r[(0, 2)] + r[(2, 0)]) / s,
            }
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            Self {
                w: (r[(0, 2)] - r[(2, 0)]) / s,
                x: (r[(0, 1)] + r[(1, 0)]) / s,
                y: 0.25 * s,
                z: (r[(1, 2)] + r[(2, 1)]) / s,
            }
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            Self {
                w: (r[(1, 0)] - r[(0, 1)]) / s,
                x: (r[(0, 2)] + r[(2, 0)]) / s,
                y: (r[(1, 2)] + r[(2, 1)]) / s,
                z: 0.25 * s,
            }
        };
        q.canonical()
    }

    pub fn from_euler(angles: &EulerAngles) -> Self {
        let (sr, cr) = (0.5 * angles.roll).sin_cos();
        let (sp, cp) = (0.5 * angles.pitch).sin_cos();
        let (sy, cy) = (0.5 * angles.yaw).sin_cos();
        Self {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
        .canonical()
    }

    pub fn to_euler(&self) -> EulerAngles {
        rotation_to_euler(&self.to_rotation())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        // v + 2w (u x v) + 2 u x (u x v)
        let u = self.vector();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Roll, pitch, yaw in radians (Z-Y-X order).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to_rotation(angles: &EulerAngles) -> Result<Matrix3<f64>> {
    if !(angles.roll.is_finite() && angles.pitch.is_finite() && angles.yaw.is_finite()) {
        return Err(Error::NumericInput("Euler angles"));
    }
    if angles.pitch.abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(Error::DegenerateAngles { pitch: angles.pitch });
    }
    let (sf, cf) = angles.roll.sin_cos();
    let (st, ct) = angles.pitch.sin_cos();
    let (sp, cp) = angles.yaw.sin_cos();
    Ok(Matrix3::new(
        cp * ct,
        cp * st * sf - sp * cf,
        cp * st * cf + sp * sf,
        sp * ct,
        sp * st * sf + cp * cf,
        sp * st * cf - cp * sf,
        -st,
        ct * sf,
        ct * cf,
    ))
}

pub fn rotation_to_euler(r: &Matrix3<f64>) -> EulerAngles {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    EulerAngles { roll, pitch, yaw }
}

#[inline]
pub fn rotate_body_to_inertial(r: &Matrix3<f64>, v_body: &Vector3<f64>) -> Vector3<f64> {
    r * v_body
}

/// Position plus orientation of a frame relative to its parent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose6 {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion,
}

impl Pose6 {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion) -> Self {
        Self { position, orientation }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }

    /// `self ∘ child`: express a pose given in this frame in the parent frame.
    pub fn compose(&self, child: &Pose6) -> Pose6 {
        Pose6 {
            position: self.position + self.orientation.rotate(&child.position),
            orientation: self.orientation.mul(&child.orientation),
        }
    }

    pub fn inverse(&self) -> Pose6 {
        let inv = self.orientation.inverse();
        Pose6 { position: -inv.rotate(&self.position), orientation: inv }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation.rotate(p)
    }
}

/// Six-vector `actual - target`: position difference followed by the rotation
/// vector of `q_target⁻¹ · q_actual`.
pub fn pose_error(actual: &Pose6, target: &Pose6) -> Vector6<f64> {
    let dp = actual.position - target.position;
    let dr = target.orientation.inverse().mul(&actual.orientation).log();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rx(a: f64) -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos())
    }
    fn ry(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), 0.0, a.sin(), 0.0, 1.0, 0.0, -a.sin(), 0.0, a.cos())
    }
    fn rz(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn zero_angles_give_identity() {
        let r = euler_to_rotation(&EulerAngles::default()).unwrap();
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn quarter_yaw_maps_x_to_y() {
        let r = euler_to_rotation(&EulerAngles::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        let v = rotate_body_to_inertial(&r, &Vector3::x());
        assert_abs_diff_eq!(v, Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn euler_matches_elementary_composition() {
        let r = euler_to_rotation(&EulerAngles::new(0.1, 0.2, 0.3)).unwrap();
        let oracle = rz(0.3) * ry(0.2) * rx(0.1);
        assert_abs_diff_eq!(r, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn gimbal_pitch_is_rejected() {
        let e = euler_to_rotation(&EulerAngles::new(0.0, FRAC_PI_2, 0.0));
        assert!(matches!(e, Err(Error::DegenerateAngles { .. })));
        let e = euler_to_rotation(&EulerAngles::new(0.0, -(FRAC_PI_2 - 5e-7), 0.0));
        assert!(matches!(e, Err(Error::DegenerateAngles { .. })));
        assert!(euler_to_rotation(&EulerAngles::new(0.0, FRAC_PI_2 - 1e-3, 0.0)).is_ok());
    }

    #[test]
    fn quaternion_euler_agree_with_matrix_route() {
        let e = EulerAngles::new(-0.4, 0.7, 2.5);
        let q = UnitQuaternion::from_euler(&e);
        assert_abs_diff_eq!(q.to_rotation(), euler_to_rotation(&e).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn identity_rotation_is_noop() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(rotate_body_to_inertial(&Matrix3::identity(), &v), v);
    }

    #[test]
    fn rotation_preserves_norm_on_seeded_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..1000 {
            let e = EulerAngles::new(
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI..PI),
            );
            let r = euler_to_rotation(&e).unwrap();
            let v = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            assert_abs_diff_eq!(rotate_body_to_inertial(&r, &v).norm(), v.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn pose_error_cases() {
        let a = Pose6::new(Vector3::new(0.3, -0.2, 1.0), UnitQuaternion::from_euler(&EulerAngles::new(0.1, 0.0, 0.4)));
        assert_abs_diff_eq!(pose_error(&a, &a), Vector6::zeros(), epsilon = 1e-15);

        let target = Pose6::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let actual = Pose6::identity();
        assert_abs_diff_eq!(
            pose_error(&actual, &target),
            Vector6::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            epsilon = 1e-15
        );

        // log-map oracle: relative rotation of 0.2 rad about z has rotation vector (0, 0, 0.2)
        let target = Pose6::new(Vector3::zeros(), UnitQuaternion::from_axis_angle(&Vector3::x(), 0.3));
        let rel = UnitQuaternion { w: 0.1f64.cos(), x: 0.0, y: 0.0, z: 0.1f64.sin() };
        let actual = Pose6::new(Vector3::zeros(), target.orientation.mul(&rel));
        let err = pose_error(&actual, &target);
        assert_abs_diff_eq!(err.fixed_rows::<3>(3).into_owned(), Vector3::new(0.0, 0.0, 0.2), epsilon = 1e-9);
    }

    #[test]
    fn log_handles_half_turn_and_tiny_angles() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::y(), PI);
        assert_abs_diff_eq!(q.log().norm(), PI, epsilon = 1e-12);
        let q = UnitQuaternion::exp(&Vector3::new(1e-10, -2e-10, 3e-10));
        assert_abs_diff_eq!(q.log(), Vector3::new(1e-10, -2e-10, 3e-10), epsilon = 1e-20);
    }

    #[test]
    fn compose_and_inverse() {
        let a = Pose6::new(Vector3::new(1.0, 2.0, 3.0), UnitQuaternion::from_euler(&EulerAngles::new(0.3, -0.2, 1.0)));
        let id = a.compose(&a.inverse());
        assert_abs_diff_eq!(id.position, Vector3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(id.orientation.angle(), 0.0, epsilon = 1e-12);
    }

    prop_compose! {
        fn any_quat()(w in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64)
            -> Option<UnitQuaternion> {
            UnitQuaternion::new_normalize(w, x, y, z).ok()
        }
    }

    proptest! {
        #[test]
        fn quaternion_matrix_round_trip(q in any_quat()) {
            if let Some(q) = q {
                let back = UnitQuaternion::from_rotation(&q.to_rotation());
                prop_assert!((back.w - q.w).abs() < 1e-9);
                prop_assert!((back.x - q.x).abs() < 1e-9);
                prop_assert!((back.y - q.y).abs() < 1e-9);
                prop_assert!((back.z - q.z).abs() < 1e-9);
                prop_assert!(back.w >= 0.0);
            }
        }

        #[test]
        fn products_stay_unit_and_canonical(a in any_quat(), b in any_quat()) {
            if let (Some(a), Some(b)) = (a, b) {
                let p = a.mul(&b);
                prop_assert!((p.norm() - 1.0).abs() < 1e-9);
                prop_assert!(p.w >= 0.0);
            }
        }

        #[test]
        fn euler_round_trip(roll in -3.1..3.1f64, pitch in -1.55..1.55f64, yaw in -3.1..3.1f64) {
            let e = EulerAngles::new(roll, pitch, yaw);
            let back = rotation_to_euler(&euler_to_rotation(&e).unwrap());
            prop_assert!((back.roll - roll).abs() < 1e-9);
            prop_assert!((back.pitch - pitch).abs() < 1e-9);
            prop_assert!((back.yaw - yaw).abs() < 1e-9);
        }

        #[test]
        fn pose_error_of_self_is_zero(q in any_quat(), x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
            if let Some(q) = q {
                let p = Pose6::new(Vector3::new(x, y, z), q);
                prop_assert!(pose_error(&p, &p).norm() < 1e-12);
            }
        }
    }
}
