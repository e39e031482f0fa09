//! Interception controllers for the deck-mounted arm.
//!
//! All three share the task-space cost
//!
//! ```text
//! J = Σ_{k<h} ‖x_e[k] − x̂_u[k]‖²_Q + Σ_{k<h} ‖u_k‖²_R + ‖x_e[h] − x̂_u[h]‖²_{Q_N}
//! ```
//!
//! where `x_e[k] = base_k ∘ FK(q_k)` and the joint trajectory follows the exact
//! discrete double integrator. [`solve_horizon`] minimizes `J` by sequential
//! linearization: each pass linearizes the pose error around the current best
//! trajectory and solves a dense QP in the stacked controls.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::arm::{build_discrete_model, check_limits_tol, kinematics, ArmModel, JointState, Joints, DOF};
use crate::error::{Error, Result};
use crate::frames::{pose_error, Pose6};
use crate::qp::{kkt_residuals, solve_qp_hinted, QpProblem, QpSettings};

pub type Matrix7 = SMatrix<f64, DOF, DOF>;

pub const MAX_HORIZON: usize = 100;
/// Tolerance used when auditing a plan against the true rollout.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Matrix6<f64>,
    pub r: Matrix7,
    pub q_n: Matrix6<f64>,
    /// Diagonal weight on `q_k − posture_reference`, k = 1…h.
    pub posture: Joints,
    pub posture_reference: Joints,
}

impl CostWeights {
    pub fn diagonal(q: [f64; 6], r: [f64; DOF], q_n: [f64; 6]) -> Self {
        Self {
            q: Matrix6::from_diagonal(&Vector6::from(q)),
            r: Matrix7::from_diagonal(&Joints::from(r)),
            q_n: Matrix6::from_diagonal(&Vector6::from(q_n)),
            posture: Joints::zeros(),
            posture_reference: Joints::zeros(),
        }
    }

    pub fn with_posture(mut self, weight: [f64; DOF], reference: &Joints) -> Self {
        self.posture = Joints::from(weight);
        self.posture_reference = *reference;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min_eig6 = |m: &Matrix6<f64>| m.symmetric_eigen().eigenvalues.min();
        let all = self.q.iter().chain(self.r.iter()).chain(self.q_n.iter()).chain(self.posture.iter());
        if all.chain(self.posture_reference.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("cost weights must be finite".into()));
        }
        if self.posture.iter().any(|&v| v < 0.0) {
            return Err(Error::Config("posture weights must be nonnegative".into()));
        }
        if min_eig6(&self.q) < -1e-10 {
            return Err(Error::Config("stage weight Q must be positive semidefinite".into()));
        }
        if min_eig6(&self.q_n) < -1e-10 {
            return Err(Error::Config("terminal weight Q_N must be positive semidefinite".into()));
        }
        if self.r.symmetric_eigen().eigenvalues.min() < 1e-10 {
            return Err(Error::Config("effort weight R must be positive definite".into()));
        }
        Ok(())
    }

    /// Tracking weights multiplied by `factor`; `R` unchanged.
    pub fn with_tracking_scale(&self, factor: f64) -> Self {
        Self { q: self.q * factor, q_n: self.q_n * factor, ..self.clone() }
    }
}

/// How the Euclidean acceleration bound `‖u_k‖ ≤ q̈_max` enters the QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelBound {
    /// `‖u_k‖_∞ ≤ q̈_max/√7`, an inner box of the ball.
    #[default]
    Box,
    /// Per-joint box `|u_{k,i}| ≤ q̈_max w_i` with `‖w‖ = 1`, `w` re-aimed each
    /// pass along the previous solution.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSettings {
    pub dt: f64,
    pub max_passes: usize,
    /// Stop relinearizing once a pass lowers `J` by less than this fraction
    /// of `max(J, 1)`.
    pub convergence_tol: f64,
    pub accel_bound: AccelBound,
    /// Linearized workspace bounds are tightened by this much.
    pub workspace_margin_m: f64,
    pub tikhonov: f64,
    pub qp: QpSettings,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            dt: 0.025,
            max_passes: 3,
            convergence_tol: 1e-6,
            accel_bound: AccelBound::Box,
            workspace_margin_m: 1e-3,
            tikhonov: 1e-8,
            qp: QpSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    PassLimit,
    /// A relinearized QP had no solution; the best earlier plan is returned.
    QpInfeasible,
    /// The QP hit its iteration cap; the best earlier plan is returned.
    IterationCap,
}

/// Controls to seed a solve with, already aligned to the new horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub controls: Vec<Joints>,
    /// Constraint rows active at the previous optimum, in the new row layout.
    pub active_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonPlan {
    pub controls: Vec<Joints>,
    /// `z_1 … z_h`.
    pub states: Vec<JointState>,
    /// `x_e[0] … x_e[h]` in the inertial frame.
    pub ee_poses: Vec<Pose6>,
    pub cost: f64,
    /// Relinearization passes (QP solves) performed.
    pub passes: usize,
    pub qp_iterations: usize,
    /// Largest KKT residual of the last QP solved (NaN if none was solved).
    pub kkt_residual: f64,
    pub solve_time_s: f64,
    /// Set only when the true rollout passed the constraint audit.
    pub feasible: bool,
    pub status: PlanStatus,
    pub active_rows: Vec<usize>,
}

impl HorizonPlan {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn first_control(&self) -> Joints {
        self.controls.first().copied().unwrap_or_else(Joints::zeros)
    }

    /// Drop the applied control and resize to `h`, padding with zero acceleration.
    pub fn shifted(&self, h: usize) -> WarmStart {
        let mut controls: Vec<Joints> = self.controls.iter().skip(1).take(h).copied().collect();
        controls.resize(h, Joints::zeros());
        let active_rows = self
            .active_rows
            .iter()
            .filter(|&&r| r >= ROWS_PER_STEP)
            .map(|r| r - ROWS_PER_STEP)
            .filter(|&r| r < h * ROWS_PER_STEP)
            .collect();
        WarmStart { controls, active_rows }
    }
}

/// Returns `J` for a plan against `target_traj` (`h + 1` poses).
pub fn evaluate_cost(plan: &HorizonPlan, target_traj: &[Pose6], weights: &CostWeights) -> Result<f64> {
    let h = plan.controls.len();
    if plan.ee_poses.len() != h + 1 || target_traj.len() != h + 1 {
        return Err(Error::Shape(format!(
            "cost needs {} poses for {h} controls, plan has {} and target {}",
            h + 1,
            plan.ee_poses.len(),
            target_traj.len()
        )));
    }
    if plan.states.len() != h {
        return Err(Error::Shape(format!("cost needs {h} states, plan has {}", plan.states.len())));
    }
    Ok(trajectory_cost(&plan.controls, &plan.states, &plan.ee_poses, target_traj, weights))
}

fn trajectory_cost(controls: &[Joints], states: &[JointState], ee_poses: &[Pose6], target: &[Pose6], weights: &CostWeights) -> f64 {
    let h = controls.len();
    let mut j = 0.0;
    for k in 0..=h {
        let e = pose_error(&ee_poses[k], &target[k]);
        let w = if k == h { &weights.q_n } else { &weights.q };
        j += e.dot(&(w * e));
    }
    for u in controls {
        j += u.dot(&(weights.r * u));
    }
    for z in states {
        let d = z.q - weights.posture_reference;
        j += d.dot(&weights.posture.component_mul(&d));
    }
    j
}

/// Joint states `z_1 … z_h` under the exact discrete model.
pub fn rollout(z0: &JointState, controls: &[Joints], dt: f64) -> Vec<JointState> {
    let mut z = *z0;
    controls
        .iter()
        .map(|u| {
            z = JointState { q: z.q + z.q_dot * dt + u * (0.5 * dt * dt), q_dot: z.q_dot + u * dt, stamp: z.stamp + dt };
            z
        })
        .collect()
}

/// Checks every step of a rollout against joint, velocity, acceleration-ball and
/// workspace limits with tolerance [`AUDIT_TOL`].
pub fn audit_rollout(model: &ArmModel, states: &[JointState], controls: &[Joints]) -> bool {
    states.iter().zip(controls).all(|(z, u)| check_limits_tol(model, &z.q, &z.q_dot, u, AUDIT_TOL).is_empty())
}

/// Per step: u upper/lower, q upper/lower, q̇ upper/lower (7 each), workspace upper/lower (3 each),
/// braking-viability upper/lower (7 each).
const ROWS_PER_STEP: usize = 8 * DOF + 6;

struct Candidate {
    controls: Vec<Joints>,
    states: Vec<JointState>,
    ee_poses: Vec<Pose6>,
    cost: f64,
    feasible: bool,
}

impl Candidate {
    fn evaluate(
        z0: &JointState,
        controls: Vec<Joints>,
        target: &[Pose6],
        base: &[Pose6],
        model: &ArmModel,
        weights: &CostWeights,
        dt: f64,
    ) -> Self {
        let states = rollout(z0, &controls, dt);
        let mut ee_poses = Vec::with_capacity(controls.len() + 1);
        ee_poses.push(crate::arm::forward_kinematics(model, &z0.q, &base[0]));
        for (k, z) in states.iter().enumerate() {
            ee_poses.push(crate::arm::forward_kinematics(model, &z.q, &base[k + 1]));
        }
        let cost = trajectory_cost(&controls, &states, &ee_poses, target, weights);
        let feasible = audit_rollout(model, &states, &controls) && cost.is_finite();
        Self { controls, states, ee_poses, cost, feasible }
    }

    /// Feasible beats infeasible; otherwise lower cost wins.
    fn better_than(&self, other: &Candidate) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            _ => self.cost < other.cost,
        }
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse right Jacobian of SO(3): `log(exp(φ) exp(ε)) ≈ φ + Jr⁻¹(φ) ε`.
fn right_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let s = skew(phi);
    let coeff = if theta < 1e-6 {
        1.0 / 12.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() + s * 0.5 + s * s * coeff
}

/// Pose error at `q` and its Jacobian with respect to `q`.
fn linearize_pose_error(
    model: &ArmModel,
    q: &Joints,
    base: &Pose6,
    target: &Pose6,
) -> (Pose6, crate::arm::Jacobian, Vector6<f64>, SMatrix<f64, 6, DOF>) {
    let (pose, jac) = kinematics(model, q, base);
    let e = pose_error(&pose, target);
    let mut m = SMatrix::<f64, 6, DOF>::zeros();
    m.fixed_rows_mut::<3>(0).copy_from(&jac.fixed_rows::<3>(0));
    let ori = right_jacobian_inverse(&e.fixed_rows::<3>(3).into_owned()) * pose.orientation.to_rotation().transpose();
    m.fixed_rows_mut::<3>(3).copy_from(&(ori * jac.fixed_rows::<3>(3)));
    (pose, jac, e, m)
}

/// Velocity multiplier `c` such that `q + c q̇` bounds the position reached
/// when braking joint `i` at the box acceleration limit, one step of slack
/// included.
pub fn braking_lead(model: &ArmModel, i: usize, dt: f64) -> f64 {
    let a = model.qdd_max_rad_s2 / (DOF as f64).sqrt();
    model.qd_max_rad_s[i] / (2.0 * a) + dt
}

fn accel_box(model: &ArmModel, mode: AccelBound, reference: &Joints) -> Joints {
    let n = (DOF as f64).sqrt();
    match mode {
        AccelBound::Box => Joints::repeat(model.qdd_max_rad_s2 / n),
        AccelBound::Ball => {
            let floor = 0.25 * reference.norm() / n;
            let w = reference.map(|v| v.abs() + floor.max(1e-9));
            if reference.norm() < 1e-9 {
                Joints::repeat(model.qdd_max_rad_s2 / n)
            } else {
                w * (model.qdd_max_rad_s2 / w.norm())
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_qp(
    z0: &JointState,
    lin: &Candidate,
    target: &[Pose6],
    base: &[Pose6],
    model: &ArmModel,
    weights: &CostWeights,
    settings: &PlannerSettings,
) -> QpProblem {
    let h = lin.controls.len();
    let n = DOF * h;
    let dt = settings.dt;
    let coef = |k: usize, j: usize| if j < k { dt * dt * ((k - j) as f64 - 0.5) } else { 0.0 };

    // Stage blocks P_k = MᵀWM and v_k = MᵀW g_k, with g_k the residual at U = 0.
    let mut p_blocks = Vec::with_capacity(h);
    let mut v_blocks = Vec::with_capacity(h);
    let mut deck_jac = Vec::with_capacity(h);
    let mut deck_offset = Vec::with_capacity(h);
    for k in 1..=h {
        let q_bar = lin.states[k - 1].q;
        let (pose, jac, e, m) = linearize_pose_error(model, &q_bar, &base[k], &target[k]);

        let q_shift: Joints = (0..k).fold(Joints::zeros(), |acc, j| acc + lin.controls[j] * coef(k, j));
        let g = e - m * q_shift;
        let w_raw = if k == h { &weights.q_n } else { &weights.q };
        let w = (w_raw + w_raw.transpose()) * 0.5;
        let mtw = m.transpose() * w;
        let posture = Matrix7::from_diagonal(&weights.posture);
        let q_free = z0.q + z0.q_dot * (k as f64 * settings.dt);
        p_blocks.push(mtw * m + posture);
        v_blocks.push(mtw * g + posture * (q_free - weights.posture_reference));

        let rb = base[k].orientation.to_rotation().transpose();
        let jd = rb * jac.fixed_rows::<3>(0);
        let p_deck = rb * (pose.position - base[k].position);
        deck_jac.push(jd);
        deck_offset.push(p_deck - jd * q_shift);
    }

    let mut hessian = DMatrix::<f64>::zeros(n, n);
    let mut linear = DVector::<f64>::zeros(n);
    let r_reg = (weights.r + weights.r.transpose()) * 0.5 + Matrix7::identity() * settings.tikhonov;
    for i in 0..h {
        for j in i..h {
            let mut block = Matrix7::zeros();
            for k in (j + 1)..=h {
                block += p_blocks[k - 1] * (coef(k, i) * coef(k, j));
            }
            if i == j {
                block += r_reg;
            }
            hessian.view_mut((DOF * i, DOF * j), (DOF, DOF)).copy_from(&block);
            if i != j {
                hessian.view_mut((DOF * j, DOF * i), (DOF, DOF)).copy_from(&block.transpose());
            }
        }
        let mut a = Joints::zeros();
        for k in (i + 1)..=h {
            a += v_blocks[k - 1] * coef(k, i);
        }
        linear.rows_mut(DOF * i, DOF).copy_from(&a);
    }

    let m_rows = ROWS_PER_STEP * h;
    let mut c = DMatrix::<f64>::zeros(m_rows, n);
    let mut b = DVector::<f64>::zeros(m_rows);
    let (q_min, q_max, qd_max) = (model.q_min(), model.q_max(), model.qd_max());
    let ws_min = Vector3::from(model.workspace_min_m).add_scalar(settings.workspace_margin_m);
    let ws_max = Vector3::from(model.workspace_max_m).add_scalar(-settings.workspace_margin_m);
    for s in 0..h {
        let k = s + 1;
        let row0 = ROWS_PER_STEP * s;
        let ub = accel_box(model, settings.accel_bound, &lin.controls[s]);
        let q_free = z0.q + z0.q_dot * (k as f64 * dt);
        for i in 0..DOF {
            c[(row0 + i, DOF * s + i)] = -1.0;
            b[row0 + i] = -ub[i];
            c[(row0 + DOF + i, DOF * s + i)] = 1.0;
            b[row0 + DOF + i] = -ub[i];
            for j in 0..k {
                let cq = coef(k, j);
                c[(row0 + 2 * DOF + i, DOF * j + i)] = -cq;
                c[(row0 + 3 * DOF + i, DOF * j + i)] = cq;
                c[(row0 + 4 * DOF + i, DOF * j + i)] = -dt;
                c[(row0 + 5 * DOF + i, DOF * j + i)] = dt;
            }
            b[row0 + 2 * DOF + i] = -(q_max[i] - q_free[i]);
            b[row0 + 3 * DOF + i] = q_min[i] - q_free[i];
            b[row0 + 4 * DOF + i] = -(qd_max[i] - z0.q_dot[i]);
            b[row0 + 5 * DOF + i] = -qd_max[i] - z0.q_dot[i];
            // stopping distance at full braking stays inside the joint range
            let lead = braking_lead(model, i, dt);
            for j in 0..k {
                let cb = coef(k, j) + lead * dt;
                c[(row0 + 6 * DOF + 6 + i, DOF * j + i)] = -cb;
                c[(row0 + 7 * DOF + 6 + i, DOF * j + i)] = cb;
            }
            b[row0 + 6 * DOF + 6 + i] = -(q_max[i] - q_free[i] - lead * z0.q_dot[i]);
            b[row0 + 7 * DOF + 6 + i] = q_min[i] - q_free[i] - lead * z0.q_dot[i];
        }
        // p_deck(U) ≈ w + Jd Σ c_kj u_j
        let jd = &deck_jac[s];
        let w = deck_offset[s];
        for axis in 0..3 {
            let up = row0 + 6 * DOF + axis;
            let lo = row0 + 6 * DOF + 3 + axis;
            for j in 0..k {
                let cq = coef(k, j);
                for i in 0..DOF {
                    let v = jd[(axis, i)] * cq;
                    c[(up, DOF * j + i)] = -v;
                    c[(lo, DOF * j + i)] = v;
                }
            }
            b[up] = -(ws_max[axis] - w[axis]);
            b[lo] = ws_min[axis] - w[axis];
        }
    }

    QpProblem { hessian, linear, constraints: c, bounds: b }
}

/// One finite-horizon solve from `z0` over `h` steps.
///
/// `target_traj` and `base_traj` must supply at least `h + 1` inertial poses at
/// the step times `t_0 … t_h`; extra samples are ignored.
#[allow(clippy::too_many_arguments)]
pub fn solve_horizon(
    z0: &JointState,
    target_traj: &[Pose6],
    base_traj: &[Pose6],
    model: &ArmModel,
    weights: &CostWeights,
    h: usize,
    warm: Option<&WarmStart>,
    settings: &PlannerSettings,
) -> Result<HorizonPlan> {
    if !(1..=MAX_HORIZON).contains(&h) {
        return Err(Error::Shape(format!("horizon must lie in 1..={MAX_HORIZON}, got {h}")));
    }
    if target_traj.len() < h + 1 || base_traj.len() < h + 1 {
        return Err(Error::Shape(format!(
            "horizon {h} needs {} samples, target has {} and base {}",
            h + 1,
            target_traj.len(),
            base_traj.len()
        )));
    }
    build_discrete_model(settings.dt)?;
    let started = Instant::now();
    let target = &target_traj[..=h];
    let base = &base_traj[..=h];

    let mut init: Vec<Joints> = warm.map(|w| w.controls.clone()).unwrap_or_default();
    init.resize(h, Joints::zeros());
    let mut hint: Vec<usize> = warm.map(|w| w.active_rows.clone()).unwrap_or_default();
    let mut best = Candidate::evaluate(z0, init, target, base, model, weights, settings.dt);

    let mut passes = 0;
    let mut qp_iterations = 0;
    let mut kkt_residual = f64::NAN;
    let mut status = PlanStatus::PassLimit;
    while passes < settings.max_passes {
        let problem = build_qp(z0, &best, target, base, model, weights, settings);
        let solution = match solve_qp_hinted(&problem, &settings.qp, &hint) {
            Ok(s) => s,
            Err(Error::Infeasible) => {
                status = PlanStatus::QpInfeasible;
                break;
            }
            Err(e) => return Err(e),
        };
        passes += 1;
        qp_iterations += solution.iterations;
        kkt_residual = kkt_residuals(&problem, &solution.x, &solution.multipliers(problem.num_constraints())).max();
        hint = solution.active.iter().map(|a| a.0).collect();

        let proposal: Vec<Joints> = (0..h).map(|s| Joints::from_column_slice(&solution.x.as_slice()[DOF * s..DOF * (s + 1)])).collect();
        let mut accepted = None;
        for alpha in [1.0, 0.5, 0.25] {
            let controls = best.controls.iter().zip(&proposal).map(|(a, b)| a + (b - a) * alpha).collect();
            let cand = Candidate::evaluate(z0, controls, target, base, model, weights, settings.dt);
            if cand.better_than(&best) {
                accepted = Some(cand);
                break;
            }
        }
        match accepted {
            Some(cand) => {
                let decrease = best.cost - cand.cost;
                let was_feasible = best.feasible;
                best = cand;
                if was_feasible && decrease < settings.convergence_tol * best.cost.max(1.0) {
                    status = PlanStatus::Converged;
                    break;
                }
            }
            None => {
                status = PlanStatus::Converged;
                break;
            }
        }
    }

    Ok(HorizonPlan {
        controls: best.controls,
        states: best.states,
        ee_poses: best.ee_poses,
        cost: best.cost,
        passes,
        qp_iterations,
        kkt_residual,
        solve_time_s: started.elapsed().as_secs_f64(),
        feasible: best.feasible,
        status,
        active_rows: hint,
    })
}

/// Gains of the direct task-space follower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FollowingGains {
    pub kp_position_per_s2: f64,
    pub kp_orientation_per_s2: f64,
    pub kd_linear_per_s: f64,
    pub kd_angular_per_s: f64,
    pub damping: f64,
}

impl Default for FollowingGains {
    fn default() -> Self {
        Self {
            kp_position_per_s2: 60.0,
            kp_orientation_per_s2: 60.0,
            kd_linear_per_s: 12.0,
            kd_angular_per_s: 12.0,
            damping: 0.05,
        }
    }
}

/// Per-joint clamp to the accelerations that keep the next state inside the
/// position and velocity limits, then scaling onto the ball `‖u‖ ≤ q̈_max`.
pub fn clamp_to_limits(model: &ArmModel, z: &JointState, u: &Joints, dt: f64) -> Joints {
    let mut out = *u;
    for i in 0..DOF {
        let (q, qd) = (z.q[i], z.q_dot[i]);
        let v_lo = (-model.qd_max_rad_s[i] - qd) / dt;
        let v_hi = (model.qd_max_rad_s[i] - qd) / dt;
        let lead = braking_lead(model, i, dt);
        let gain = 0.5 * dt * dt + lead * dt;
        let p_lo = (model.q_min_rad[i] - q - qd * (dt + lead)) / gain;
        let p_hi = (model.q_max_rad[i] - q - qd * (dt + lead)) / gain;
        let (lo, hi) = if v_lo.max(p_lo) <= v_hi.min(p_hi) { (v_lo.max(p_lo), v_hi.min(p_hi)) } else { (v_lo, v_hi) };
        out[i] = out[i].clamp(lo, hi);
    }
    let norm = out.norm();
    if norm > model.qdd_max_rad_s2 {
        out *= model.qdd_max_rad_s2 / norm;
    }
    out
}

/// Direct task-space PD follower: `a = Kp·e + Kd·(v_target − J q̇)` with `e` the
/// target-minus-actual pose error in the inertial frame, mapped through the
/// damped least-squares inverse `Jᵀ(JJᵀ + λ²I)⁻¹` and clamped to the limits.
pub fn simple_following_step(
    z0: &JointState,
    target_now: &Pose6,
    target_vel: &Vector6<f64>,
    model: &ArmModel,
    base: &Pose6,
    gains: &FollowingGains,
    dt: f64,
) -> Joints {
    let (ee, jac) = kinematics(model, &z0.q, base);
    let e_pos = target_now.position - ee.position;
    let e_ori = target_now.orientation.mul(&ee.orientation.inverse()).log();
    let twist = jac * z0.q_dot;
    let mut a = Vector6::zeros();
    for i in 0..3 {
        a[i] = gains.kp_position_per_s2 * e_pos[i] + gains.kd_linear_per_s * (target_vel[i] - twist[i]);
        a[i + 3] = gains.kp_orientation_per_s2 * e_ori[i] + gains.kd_angular_per_s * (target_vel[i + 3] - twist[i + 3]);
    }
    let jjt = jac * jac.transpose() + Matrix6::identity() * (gains.damping * gains.damping);
    let u = match jjt.cholesky() {
        Some(ch) => jac.transpose() * ch.solve(&a),
        None => Joints::zeros(),
    };
    if !u.iter().all(|v| v.is_finite()) {
        return Joints::zeros();
    }
    clamp_to_limits(model, z0, &u, dt)
}

/// Full-length re-plan every call, warm-started from the previous plan shifted
/// by one step.
#[allow(clippy::too_many_arguments)]
pub fn fixed_horizon_step(
    z0: &JointState,
    eskf_prediction: &[Pose6],
    base_traj: &[Pose6],
    model: &ArmModel,
    weights: &CostWeights,
    h_init: usize,
    previous: Option<&HorizonPlan>,
    settings: &PlannerSettings,
) -> Result<(Joints, HorizonPlan)> {
    let warm = previous.map(|p| p.shifted(h_init));
    let plan = solve_horizon(z0, eskf_prediction, base_traj, model, weights, h_init, warm.as_ref(), settings)?;
    Ok((plan.first_control(), plan))
}

/// Shrinking-horizon bookkeeping for one intercept window.
#[derive(Debug, Clone, PartialEq)]
pub struct RhcState {
    pub h: usize,
    pub h_init: usize,
    /// The window rolls over once this few steps remain.
    pub h_min: usize,
    /// Window end time, s.
    pub deadline: f64,
    pub warm: Option<WarmStart>,
}

impl RhcState {
    /// Fresh window of `h_init` steps starting at `t`.
    pub fn new(h_init: usize, t: f64, dt: f64) -> Self {
        Self { h: h_init.max(1), h_init: h_init.max(1), h_min: 1, deadline: t + h_init as f64 * dt, warm: None }
    }

    /// Same window with a horizon floor, clamped to `[1, h_init]`.
    pub fn with_min_horizon(mut self, h_min: usize) -> Self {
        self.h_min = h_min.clamp(1, self.h_init);
        self
    }

    /// Start a new window at `t`, keeping the warm start.
    pub fn reset(&self, t: f64, dt: f64) -> Self {
        let mut next = Self::new(self.h_init, t, dt).with_min_horizon(self.h_min);
        next.warm = self.warm.as_ref().map(|w| {
            let mut controls = w.controls.clone();
            controls.resize(self.h_init, Joints::zeros());
            WarmStart { controls, active_rows: Vec::new() }
        });
        next
    }

    /// Steps left at time `t`, clamped to `[1, h_init]`.
    pub fn steps_remaining(&self, t: f64, dt: f64) -> usize {
        let steps = ((self.deadline - t) / dt).round();
        (steps.max(1.0) as usize).min(self.h_init)
    }
}

/// Solves over the steps left in the current window and applies the first
/// control; the window restarts after its last step.
#[allow(clippy::too_many_arguments)]
pub fn shrinking_horizon_step(
    rhc: &RhcState,
    t: f64,
    z0: &JointState,
    eskf_prediction: &[Pose6],
    base_traj: &[Pose6],
    model: &ArmModel,
    weights: &CostWeights,
    settings: &PlannerSettings,
) -> Result<(Joints, HorizonPlan, RhcState)> {
    let h = rhc.steps_remaining(t, settings.dt).min(rhc.h.max(1));
    let plan = solve_horizon(z0, eskf_prediction, base_traj, model, weights, h, rhc.warm.as_ref(), settings)?;
    let next = if h <= rhc.h_min {
        let mut done = rhc.clone();
        done.warm = Some(plan.shifted(h.saturating_sub(1)));
        done.reset(t + settings.dt, settings.dt)
    } else {
        RhcState { h: h - 1, h_init: rhc.h_init, h_min: rhc.h_min, deadline: rhc.deadline, warm: Some(plan.shifted(h - 1)) }
    };
    Ok((plan.first_control(), plan, next))
}
