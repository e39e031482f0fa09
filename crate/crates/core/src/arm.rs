//! Seven-joint serial arm on the moving deck: modified-DH forward kinematics,
//! geometric Jacobian, exact joint-space double integrator and limit audit.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::frames::{Pose6, UnitQuaternion};

pub const DOF: usize = 7;
pub const STATE_DIM: usize = 2 * DOF;

pub type Joints = SVector<f64, DOF>;
pub type Jacobian = SMatrix<f64, 6, DOF>;

/// Recommended discretization range for the planner.
pub const DT_RANGE: (f64, f64) = (0.025, 0.05);

/// One row of a modified (Craig) DH table:
/// `T = RotX(alpha) · TransX(a) · RotZ(theta + offset) · TransZ(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhLink {
    pub a_m: f64,
    pub alpha_rad: f64,
    pub d_m: f64,
    pub theta_offset_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmModel {
    pub dh: [DhLink; DOF],
    pub q_min_rad: [f64; DOF],
    pub q_max_rad: [f64; DOF],
    pub qd_max_rad_s: [f64; DOF],
    /// Bound on the Euclidean norm of the joint-acceleration vector.
    pub qdd_max_rad_s2: f64,
    /// Axis-aligned end-effector workspace box in the deck frame.
    pub workspace_min_m: [f64; 3],
    pub workspace_max_m: [f64; 3],
    pub home_q_rad: [f64; DOF],
}

impl Default for ArmModel {
    fn default() -> Self {
        let link = |alpha_rad: f64, d_m: f64| DhLink { a_m: 0.0, alpha_rad, d_m, theta_offset_rad: 0.0 };
        let deg = |v: f64| v.to_radians();
        let q_max = [deg(170.0), deg(120.0), deg(170.0), deg(120.0), deg(170.0), deg(120.0), deg(175.0)];
        Self {
            dh: [
                link(0.0, 0.34),
                link(-FRAC_PI_2, 0.0),
                link(FRAC_PI_2, 0.40),
                link(FRAC_PI_2, 0.0),
                link(-FRAC_PI_2, 0.40),
                link(-FRAC_PI_2, 0.0),
                link(FRAC_PI_2, 0.126),
            ],
            q_min_rad: q_max.map(|v| -v),
            q_max_rad: q_max,
            qd_max_rad_s: [3.2, 3.2, 3.5, 3.5, 4.0, 4.5, 4.5],
            qdd_max_rad_s2: 60.0,
            workspace_min_m: [-0.9, -0.9, 0.15],
            workspace_max_m: [0.9, 0.9, 1.1],
            home_q_rad: [0.0, 0.1, 0.0, -1.9, 0.0, -1.2, 0.0],
        }
    }
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        for i in 0..DOF {
            if !(self.q_min_rad[i] < self.q_max_rad[i]) {
                return Err(Error::Config(format!("arm joint {} has q_min >= q_max", i + 1)));
            }
            if !(self.qd_max_rad_s[i] > 0.0) {
                return Err(Error::Config(format!("arm joint {} velocity limit must be positive", i + 1)));
            }
        }
        if !(self.qdd_max_rad_s2 > 0.0) {
            return Err(Error::Config("arm acceleration bound must be positive".into()));
        }
        if (0..3).any(|i| !(self.workspace_min_m[i] < self.workspace_max_m[i])) {
            return Err(Error::Config("arm workspace box is empty".into()));
        }
        let link_values = self.dh.iter().flat_map(|l| [l.a_m, l.alpha_rad, l.d_m, l.theta_offset_rad]);
        if link_values.chain(self.home_q_rad).any(|v| !v.is_finite()) {
            return Err(Error::Config("arm DH table must be finite".into()));
        }
        Ok(())
    }

    pub fn q_min(&self) -> Joints {
        Joints::from(self.q_min_rad)
    }
    pub fn q_max(&self) -> Joints {
        Joints::from(self.q_max_rad)
    }
    pub fn qd_max(&self) -> Joints {
        Joints::from(self.qd_max_rad_s)
    }
    pub fn home(&self) -> Joints {
        Joints::from(self.home_q_rad)
    }

    pub fn workspace_contains(&self, deck_position: &Vector3<f64>) -> bool {
        (0..3).all(|i| deck_position[i] >= self.workspace_min_m[i] && deck_position[i] <= self.workspace_max_m[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Joints,
    pub q_dot: Joints,
    pub stamp: f64,
}

impl JointState {
    pub fn at_rest(q: Joints) -> Self {
        Self { q, q_dot: Joints::zeros(), stamp: 0.0 }
    }

    pub fn to_vector(&self) -> SVector<f64, STATE_DIM> {
        let mut z = SVector::<f64, STATE_DIM>::zeros();
        z.fixed_rows_mut::<DOF>(0).copy_from(&self.q);
        z.fixed_rows_mut::<DOF>(DOF).copy_from(&self.q_dot);
        z
    }
}

/// Exact zero-order-hold discretization of the joint double integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a_d: SMatrix<f64, STATE_DIM, STATE_DIM>,
    pub b_d: SMatrix<f64, STATE_DIM, DOF>,
    pub dt: f64,
    /// Set when `dt` lies outside the recommended planning range.
    pub outside_recommended_range: bool,
}

pub fn build_discrete_model(dt: f64) -> Result<DiscreteModel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("discretization step must be positive, got {dt}")));
    }
    let mut a_d = SMatrix::<f64, STATE_DIM, STATE_DIM>::identity();
    let mut b_d = SMatrix::<f64, STATE_DIM, DOF>::zeros();
    for i in 0..DOF {
        a_d[(i, DOF + i)] = dt;
        b_d[(i, i)] = 0.5 * dt * dt;
        b_d[(DOF + i, i)] = dt;
    }
    let outside_recommended_range = dt < DT_RANGE.0 || dt > DT_RANGE.1;
    Ok(DiscreteModel { a_d, b_d, dt, outside_recommended_range })
}

impl DiscreteModel {
    /// `z_{k+1} = A_d z_k + B_d u_k`, evaluated blockwise.
    pub fn step(&self, state: &JointState, u: &Joints) -> JointState {
        let dt = self.dt;
        JointState {
            q: state.q + state.q_dot * dt + u * (0.5 * dt * dt),
            q_dot: state.q_dot + u * dt,
            stamp: state.stamp + dt,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    rotation: Matrix3<f64>,
    origin: Vector3<f64>,
}

fn link_transform(link: &DhLink, q: f64) -> Frame {
    let (sa, ca) = link.alpha_rad.sin_cos();
    let (st, ct) = (q + link.theta_offset_rad).sin_cos();
    // RotX(alpha) * RotZ(theta)
    let rotation = Matrix3::new(ct, -st, 0.0, ca * st, ca * ct, -sa, sa * st, sa * ct, ca);
    // TransX(a) then TransZ(d) along the new z axis
    let origin = Vector3::new(link.a_m, -sa * link.d_m, ca * link.d_m);
    Frame { rotation, origin }
}

fn chain(model: &ArmModel, q: &Joints, base: &Pose6) -> [Frame; DOF] {
    let mut frames = [Frame { rotation: Matrix3::identity(), origin: Vector3::zeros() }; DOF];
    let mut rotation = base.orientation.to_rotation();
    let mut origin = base.position;
    for i in 0..DOF {
        let t = link_transform(&model.dh[i], q[i]);
        origin += rotation * t.origin;
        rotation *= t.rotation;
        frames[i] = Frame { rotation, origin };
    }
    frames
}

/// End-effector pose in the inertial frame, `base ∘ T_1 ⋯ T_7`.
pub fn forward_kinematics(model: &ArmModel, q: &Joints, base: &Pose6) -> Pose6 {
    let ee = chain(model, q, base)[DOF - 1];
    Pose6::new(ee.origin, UnitQuaternion::from_rotation(&ee.rotation))
}

/// Geometric Jacobian: rows 0-2 linear velocity, rows 3-5 angular velocity, in
/// the inertial frame.
pub fn geometric_jacobian(model: &ArmModel, q: &Joints, base: &Pose6) -> Jacobian {
    let frames = chain(model, q, base);
    let tip = frames[DOF - 1].origin;
    let mut jac = Jacobian::zeros();
    for (i, f) in frames.iter().enumerate() {
        let axis = f.rotation.column(2).into_owned();
        let lin = axis.cross(&(tip - f.origin));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
    }
    jac
}

/// Pose and Jacobian from a single chain evaluation.
pub fn kinematics(model: &ArmModel, q: &Joints, base: &Pose6) -> (Pose6, Jacobian) {
    let frames = chain(model, q, base);
    let ee = frames[DOF - 1];
    let mut jac = Jacobian::zeros();
    for (i, f) in frames.iter().enumerate() {
        let axis = f.rotation.column(2).into_owned();
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&axis.cross(&(ee.origin - f.origin)));
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
    }
    (Pose6::new(ee.origin, UnitQuaternion::from_rotation(&ee.rotation)), jac)
}

/// End-effector twist for joint velocities `q_dot`.
pub fn end_effector_twist(model: &ArmModel, q: &Joints, q_dot: &Joints, base: &Pose6) -> Vector6<f64> {
    geometric_jacobian(model, q, base) * q_dot
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    PositionLow,
    PositionHigh,
    VelocityLow,
    VelocityHigh,
    AccelerationNorm,
    WorkspaceLow,
    WorkspaceHigh,
}

/// One violated constraint; `margin` is the positive amount of violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub kind: LimitKind,
    /// Joint index, or Cartesian axis for workspace entries; 0 for the norm bound.
    pub index: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub violations: Vec<LimitViolation>,
}

impl LimitReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst_margin(&self) -> f64 {
        self.violations.iter().map(|v| v.margin).fold(0.0, f64::max)
    }
}

/// Lists every violated constraint with at most `tol` slack; bounds are closed.
pub fn check_limits_tol(model: &ArmModel, q: &Joints, q_dot: &Joints, u: &Joints, tol: f64) -> LimitReport {
    let mut violations = Vec::new();
    let mut push = |kind, index, margin: f64| {
        if margin > tol {
            violations.push(LimitViolation { kind, index, margin });
        }
    };
    for i in 0..DOF {
        push(LimitKind::PositionLow, i, model.q_min_rad[i] - q[i]);
        push(LimitKind::PositionHigh, i, q[i] - model.q_max_rad[i]);
        push(LimitKind::VelocityLow, i, -model.qd_max_rad_s[i] - q_dot[i]);
        push(LimitKind::VelocityHigh, i, q_dot[i] - model.qd_max_rad_s[i]);
    }
    push(LimitKind::AccelerationNorm, 0, u.norm() - model.qdd_max_rad_s2);
    let deck = forward_kinematics(model, q, &Pose6::identity()).position;
    for k in 0..3 {
        push(LimitKind::WorkspaceLow, k, model.workspace_min_m[k] - deck[k]);
        push(LimitKind::WorkspaceHigh, k, deck[k] - model.workspace_max_m[k]);
    }
    LimitReport { violations }
}

pub fn check_limits(model: &ArmModel, q: &Joints, q_dot: &Joints, u: &Joints) -> LimitReport {
    check_limits_tol(model, q, q_dot, u, 0.0)
}
