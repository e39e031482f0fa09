//! Error-state Kalman filter over the interception target.
//!
//! The nominal state carries position, velocity (and acceleration for the
//! constant-acceleration model) plus a unit quaternion. The filter's error
//! state is minimal: `[δp, δv, (δa,) δθ]` with the attitude error defined by
//! `q_true = q_nominal ⊗ Exp(δθ)`. After each update the error is injected with
//! `⊕` and reset to zero.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Pose6, UnitQuaternion};

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    ConstantVelocity,
    ConstantAcceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMotionModel {
    pub kind: MotionKind,
    /// White-noise density driving the highest kinematic derivative, per axis.
    /// For the constant-velocity model this is an acceleration density
    /// `(m/s²)²/Hz`; for constant acceleration it drives jerk.
    pub process_density: f64,
    /// Attitude random-walk density `(rad/s)²/Hz`.
    pub attitude_density: f64,
}

impl Default for TargetMotionModel {
    fn default() -> Self {
        Self { kind: MotionKind::ConstantVelocity, process_density: 0.5, attitude_density: 1e-4 }
    }
}

impl TargetMotionModel {
    pub fn error_dim(&self) -> usize {
        match self.kind {
            MotionKind::ConstantVelocity => 9,
            MotionKind::ConstantAcceleration => 12,
        }
    }

    /// Kinematic order: 2 for position/velocity, 3 with acceleration.
    fn order(&self) -> usize {
        self.error_dim() / 3 - 1
    }

    pub fn attitude_offset(&self) -> usize {
        self.error_dim() - 3
    }

    /// Error-state transition for a step `dt`.
    pub fn transition(&self, dt: f64) -> DMatrix<f64> {
        let n = self.error_dim();
        let order = self.order();
        let mut f = DMatrix::identity(n, n);
        // block (i, j) = dt^(j-i) / (j-i)! for the kinematic chain
        for i in 0..order {
            for j in (i + 1)..order {
                let p = (j - i) as i32;
                let c = dt.powi(p) / factorial(p as u32);
                for k in 0..3 {
                    f[(3 * i + k, 3 * j + k)] = c;
                }
            }
        }
        f
    }

    /// Exact discretization of the continuous white-noise model over `dt`.
    pub fn process_noise(&self, dt: f64) -> DMatrix<f64> {
        let n = self.error_dim();
        let order = self.order();
        let mut q = DMatrix::zeros(n, n);
        // integral of Φ(s) G G^T Φ(s)^T: entry (i, j) = q dt^(a+b+1) / ((a+b+1) a! b!)
        // with a = order-1-i, b = order-1-j
        for i in 0..order {
            for j in 0..order {
                let a = (order - 1 - i) as u32;
                let b = (order - 1 - j) as u32;
                let e = a + b + 1;
                let c = self.process_density * dt.powi(e as i32) / (e as f64 * factorial(a) * factorial(b));
                for k in 0..3 {
                    q[(3 * i + k, 3 * j + k)] = c;
                }
            }
        }
        let o = self.attitude_offset();
        for k in 0..3 {
            q[(o + k, o + k)] = self.attitude_density * dt;
        }
        q
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Always zero under the constant-velocity model.
    pub acceleration: Vector3<f64>,
    pub orientation: UnitQuaternion,
    pub stamp: f64,
}

impl NominalState {
    pub fn pose(&self) -> Pose6 {
        Pose6::new(self.position, self.orientation)
    }

    fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain(self.acceleration.iter()).all(|v| v.is_finite())
            && self.orientation.is_finite()
            && self.stamp.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFilterState {
    pub nominal: NominalState,
    pub covariance: DMatrix<f64>,
    pub model: TargetMotionModel,
    /// Process-noise covariance of the most recent prediction step.
    pub last_process_noise: DMatrix<f64>,
    pub position_noise: Matrix3<f64>,
    pub orientation_noise: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialUncertainty {
    pub position_m: f64,
    pub velocity_m_s: f64,
    pub acceleration_m_s2: f64,
    pub attitude_rad: f64,
}

impl Default for InitialUncertainty {
    fn default() -> Self {
        Self { position_m: 0.01, velocity_m_s: 1.0, acceleration_m_s2: 3.0, attitude_rad: 0.05 }
    }
}

impl ErrorFilterState {
    pub fn new(
        model: TargetMotionModel,
        nominal: NominalState,
        initial: &InitialUncertainty,
        position_sigma_m: f64,
        orientation_sigma_rad: f64,
    ) -> Result<Self> {
        if model.process_density < 0.0 || model.attitude_density < 0.0 {
            return Err(Error::Config("eskf noise densities must be >= 0".into()));
        }
        let n = model.error_dim();
        let mut p = DMatrix::zeros(n, n);
        let mut var = vec![initial.position_m.powi(2), initial.velocity_m_s.powi(2)];
        if model.kind == MotionKind::ConstantAcceleration {
            var.push(initial.acceleration_m_s2.powi(2));
        }
        var.push(initial.attitude_rad.powi(2));
        for (block, v) in var.iter().enumerate() {
            for k in 0..3 {
                p[(3 * block + k, 3 * block + k)] = *v;
            }
        }
        let mut nominal = nominal;
        if model.kind == MotionKind::ConstantVelocity {
            nominal.acceleration = Vector3::zeros();
        }
        Ok(Self {
            nominal,
            covariance: p,
            model,
            last_process_noise: DMatrix::zeros(n, n),
            position_noise: Matrix3::identity() * position_sigma_m.powi(2),
            orientation_noise: Matrix3::identity() * orientation_sigma_rad.powi(2),
        })
    }

    pub fn dim(&self) -> usize {
        self.model.error_dim()
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Position block of the covariance.
    pub fn position_covariance(&self) -> Matrix3<f64> {
        self.covariance.fixed_view::<3, 3>(0, 0).into_owned()
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

fn propagate_nominal(n: &NominalState, dt: f64) -> NominalState {
    NominalState {
        position: n.position + n.velocity * dt + n.acceleration * (0.5 * dt * dt),
        velocity: n.velocity + n.acceleration * dt,
        acceleration: n.acceleration,
        orientation: n.orientation,
        stamp: n.stamp + dt,
    }
}

/// Propagates the nominal state and the error covariance over `dt`.
pub fn predict(state: &ErrorFilterState, dt: f64) -> Result<ErrorFilterState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("eskf prediction step must be positive, got {dt}")));
    }
    if !state.nominal.is_finite() || state.covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("eskf state"));
    }
    let f = state.model.transition(dt);
    let q = state.model.process_noise(dt);
    let mut p = &f * &state.covariance * f.transpose() + &q;
    symmetrize(&mut p);
    Ok(ErrorFilterState {
        nominal: propagate_nominal(&state.nominal, dt),
        covariance: p,
        last_process_noise: q,
        ..state.clone()
    })
}

/// Propagates to an absolute stamp; a no-op when already there.
pub fn predict_to(state: &ErrorFilterState, stamp: f64) -> Result<ErrorFilterState> {
    let dt = stamp - state.nominal.stamp;
    if dt > 1e-12 {
        predict(state, dt)
    } else if dt < -1e-9 {
        Err(Error::StaleMeasurement { stamp, filter_stamp: state.nominal.stamp })
    } else {
        Ok(state.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub position: Vector3<f64>,
    pub orientation: Option<UnitQuaternion>,
    pub stamp: f64,
    /// Replaces the filter's configured measurement covariance when present.
    #[serde(skip)]
    pub r_override: Option<DMatrix<f64>>,
}

impl Measurement {
    pub fn position(position: Vector3<f64>, stamp: f64) -> Self {
        Self { position, orientation: None, stamp, r_override: None }
    }

    pub fn pose(pose: &Pose6, stamp: f64) -> Self {
        Self { position: pose.position, orientation: Some(pose.orientation), stamp, r_override: None }
    }

    pub fn dim(&self) -> usize {
        if self.orientation.is_some() { 6 } else { 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiagnostics {
    pub innovation: DVector<f64>,
    pub innovation_covariance: DMatrix<f64>,
    /// Normalized innovation squared.
    pub nis: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub state: ErrorFilterState,
    pub diagnostics: UpdateDiagnostics,
}

/// Measurement Jacobian with respect to the error state.
fn measurement_matrix(state: &ErrorFilterState, m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m, state.dim());
    for k in 0..3 {
        h[(k, k)] = 1.0;
    }
    if m == 6 {
        let o = state.model.attitude_offset();
        for k in 0..3 {
            h[(3 + k, o + k)] = 1.0;
        }
    }
    h
}

/// Kalman correction with Joseph-form covariance update, ⊕-injection and reset.
///
/// When the measurement is newer than the filter, the filter is first
/// predicted forward to the measurement stamp.
pub fn update(state: &ErrorFilterState, z: &Measurement) -> Result<UpdateOutcome> {
    if z.position.iter().any(|v| !v.is_finite()) || z.orientation.is_some_and(|q| !q.is_finite()) {
        return Err(Error::NumericInput("eskf measurement"));
    }
    let prior = predict_to(state, z.stamp)?;
    let m = z.dim();
    let n = prior.dim();

    let mut residual = DVector::zeros(m);
    residual.fixed_rows_mut::<3>(0).copy_from(&(z.position - prior.nominal.position));
    if let Some(q) = z.orientation {
        let d = prior.nominal.orientation.inverse().mul(&q).log();
        residual.fixed_rows_mut::<3>(3).copy_from(&d);
    }

    let r = match &z.r_override {
        Some(r) if r.nrows() == m && r.ncols() == m => r.clone(),
        Some(r) => return Err(Error::Shape(format!("measurement covariance is {}x{}, expected {m}x{m}", r.nrows(), r.ncols()))),
        None => {
            let mut r = DMatrix::zeros(m, m);
            r.view_mut((0, 0), (3, 3)).copy_from(&prior.position_noise);
            if m == 6 {
                r.view_mut((3, 3), (3, 3)).copy_from(&prior.orientation_noise);
            }
            r
        }
    };

    let h = measurement_matrix(&prior, m);
    let ph_t = &prior.covariance * h.transpose();
    let mut s = &h * &ph_t + &r;
    symmetrize(&mut s);
    let eig = s.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_INNOVATION_CONDITION) {
        return Err(Error::SingularUpdate { condition });
    }
    let chol = s.clone().cholesky().ok_or(Error::SingularUpdate { condition })?;
    // K = P H^T S^-1  →  K^T = S^-1 H P
    let k = chol.solve(&ph_t.transpose()).transpose();
    let dx = &k * &residual;

    let ikh = DMatrix::identity(n, n) - &k * &h;
    let mut p = &ikh * &prior.covariance * ikh.transpose() + &k * &r * k.transpose();

    let mut nominal = prior.nominal;
    nominal.position += dx.fixed_rows::<3>(0);
    nominal.velocity += dx.fixed_rows::<3>(3);
    if prior.model.kind == MotionKind::ConstantAcceleration {
        nominal.acceleration += dx.fixed_rows::<3>(6);
    }
    let o = prior.model.attitude_offset();
    let dtheta: Vector3<f64> = dx.fixed_rows::<3>(o).into_owned();
    nominal.orientation = nominal.orientation.mul(&UnitQuaternion::exp(&dtheta));

    // reset Jacobian for the attitude block: I - [δθ/2]×
    if dtheta.norm() > 0.0 {
        let mut g = DMatrix::<f64>::identity(n, n);
        let skew = dtheta.cross_matrix() * 0.5;
        for i in 0..3 {
            for j in 0..3 {
                g[(o + i, o + j)] -= skew[(i, j)];
            }
        }
        p = &g * p * g.transpose();
    }
    symmetrize(&mut p);

    let innovation_inv = chol.solve(&residual);
    let nis = residual.dot(&innovation_inv);
    Ok(UpdateOutcome {
        state: ErrorFilterState { nominal, covariance: p, ..prior },
        diagnostics: UpdateDiagnostics { innovation: residual, innovation_covariance: s, nis, condition },
    })
}

/// Nominal-only forecast sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub times: Vec<f64>,
    pub poses: Vec<Pose6>,
    pub velocities: Vec<Vector3<f64>>,
    /// Covariance propagated to the final sample, for diagnostics.
    pub final_covariance: DMatrix<f64>,
}

impl Extrapolation {
    pub fn last_pose(&self) -> &Pose6 {
        self.poses.last().expect("extrapolation always has at least one sample")
    }
}

/// Forecasts `steps + 1` samples spanning `[0, lead]` seconds ahead.
pub fn extrapolate(state: &ErrorFilterState, lead: f64, steps: usize) -> Result<Extrapolation> {
    if !(lead > 0.0 && lead <= 2.0) {
        return Err(Error::Config(format!("extrapolation lead {lead} s outside (0, 2]")));
    }
    let steps = steps.max(1);
    let dt = lead / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut poses = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let n = propagate_nominal(&state.nominal, dt * k as f64);
        times.push(n.stamp);
        poses.push(n.pose());
        velocities.push(n.velocity);
    }
    let f = state.model.transition(lead);
    let final_covariance = &f * &state.covariance * f.transpose() + state.model.process_noise(lead);
    Ok(Extrapolation { times, poses, velocities, final_covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nominal(position: Vector3<f64>, velocity: Vector3<f64>) -> NominalState {
        NominalState {
            position,
            velocity,
            acceleration: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            stamp: 0.0,
        }
    }

    fn cv_filter() -> ErrorFilterState {
        ErrorFilterState::new(
            TargetMotionModel::default(),
            nominal(Vector3::new(0.5, 0.0, 0.6), Vector3::new(1.0, 0.0, 0.0)),
            &InitialUncertainty::default(),
            0.005,
            0.5f64.to_radians(),
        )
        .unwrap()
    }

    #[test]
    fn constant_velocity_prediction() {
        let f = predict(&cv_filter(), 0.1).unwrap();
        assert_abs_diff_eq!(f.nominal.position, Vector3::new(0.6, 0.0, 0.6), epsilon = 1e-15);
        assert_eq!(f.nominal.velocity, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn noiseless_certainty_stays_certain() {
        let mut f = cv_filter();
        f.model.process_density = 0.0;
        f.model.attitude_density = 0.0;
        f.covariance.fill(0.0);
        let g = predict(&f, 0.3).unwrap();
        assert!(g.covariance.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn covariance_matches_dense_oracle() {
        let mut f = cv_filter();
        // a generic symmetric positive definite P
        let a = DMatrix::from_fn(9, 9, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.01 - 0.04);
        f.covariance = &a * a.transpose() + DMatrix::identity(9, 9) * 0.01;
        let dt = 0.05;
        let g = predict(&f, dt).unwrap();
        // oracle: explicit loops
        let mut fm = vec![[0.0; 9]; 9];
        for i in 0..9 {
            fm[i][i] = 1.0;
        }
        for k in 0..3 {
            fm[k][3 + k] = dt;
        }
        let q = 0.5;
        let mut qn = vec![[0.0; 9]; 9];
        for k in 0..3 {
            qn[k][k] = q * dt.powi(3) / 3.0;
            qn[k][3 + k] = q * dt.powi(2) / 2.0;
            qn[3 + k][k] = q * dt.powi(2) / 2.0;
            qn[3 + k][3 + k] = q * dt;
            qn[6 + k][6 + k] = 1e-4 * dt;
        }
        for i in 0..9 {
            for j in 0..9 {
                let mut acc = qn[i][j];
                for a in 0..9 {
                    for b in 0..9 {
                        acc += fm[i][a] * f.covariance[(a, b)] * fm[j][b];
                    }
                }
                assert_abs_diff_eq!(g.covariance[(i, j)], acc, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn constant_acceleration_noise_matches_van_loan() {
        let model = TargetMotionModel { kind: MotionKind::ConstantAcceleration, process_density: 2.0, attitude_density: 0.0 };
        let dt = 0.04;
        // Van Loan on one axis: exp([[-A, GQG^T], [0, A^T]] dt)
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 1)] = -1.0;
        m[(1, 2)] = -1.0;
        m[(2, 5)] = 2.0;
        m[(4, 3)] = 1.0;
        m[(5, 4)] = 1.0;
        let e = (m * dt).exp();
        let phi = e.view((3, 3), (3, 3)).transpose();
        let qd = &phi * e.view((0, 3), (3, 3));
        let q = model.process_noise(dt);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(q[(3 * i, 3 * j)], qd[(i, j)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn uninformative_measurement_leaves_nominal() {
        let f = cv_filter();
        let mut z = Measurement::position(Vector3::new(3.0, -2.0, 1.0), 0.0);
        z.r_override = Some(DMatrix::identity(3, 3) * 1e12);
        let out = update(&f, &z).unwrap();
        assert_abs_diff_eq!(out.state.nominal.position, f.nominal.position, epsilon = 1e-6);
    }

    #[test]
    fn scalar_reduction_gives_half_gain() {
        // isotropic P = I on the position block only, R = I: each axis is a scalar filter
        let mut f = cv_filter();
        f.covariance.fill(0.0);
        for k in 0..9 {
            f.covariance[(k, k)] = 1.0;
        }
        f.position_noise = Matrix3::identity();
        let z = Measurement::position(f.nominal.position + Vector3::new(1.0, 0.0, 0.0), 0.0);
        let out = update(&f, &z).unwrap();
        assert_abs_diff_eq!(out.state.nominal.position.x - f.nominal.position.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.state.covariance[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_innovation_contracts_covariance() {
        let f = cv_filter();
        let out = update(&f, &Measurement::pose(&f.nominal.pose(), 0.0)).unwrap();
        assert_eq!(out.state.nominal.position, f.nominal.position);
        assert!(out.state.trace() < f.trace());
    }

    #[test]
    fn singular_innovation_is_rejected() {
        let mut f = cv_filter();
        f.covariance.fill(0.0);
        let mut z = Measurement::position(Vector3::zeros(), 0.0);
        z.r_override = Some(DMatrix::zeros(3, 3));
        assert!(matches!(update(&f, &z), Err(Error::SingularUpdate { .. })));
    }

    #[test]
    fn stale_measurement_is_rejected() {
        let f = predict(&cv_filter(), 0.1).unwrap();
        let z = Measurement::position(Vector3::zeros(), 0.05);
        assert!(matches!(update(&f, &z), Err(Error::StaleMeasurement { .. })));
    }

    #[test]
    fn attitude_update_uses_right_perturbation() {
        let f = cv_filter();
        let truth = UnitQuaternion::exp(&Vector3::new(0.0, 0.0, 0.02));
        let z = Measurement { orientation: Some(truth), ..Measurement::pose(&f.nominal.pose(), 0.0) };
        let out = update(&f, &z).unwrap();
        let yaw = out.state.nominal.orientation.log().z;
        // prior attitude σ = 0.05 rad, measurement σ = 0.5°
        let gain = 0.05f64.powi(2) / (0.05f64.powi(2) + 0.5f64.to_radians().powi(2));
        assert_abs_diff_eq!(yaw, 0.02 * gain, epsilon = 1e-6);
    }

    #[test]
    fn extrapolation_cases() {
        let f = cv_filter();
        let e = extrapolate(&f, 0.5, 20).unwrap();
        assert_eq!(e.poses.len(), 21);
        assert_abs_diff_eq!(e.last_pose().position, f.nominal.position + Vector3::new(0.5, 0.0, 0.0), epsilon = 1e-12);

        let mut still = cv_filter();
        still.nominal.velocity = Vector3::zeros();
        let e = extrapolate(&still, 0.5, 10).unwrap();
        assert!(e.poses.iter().all(|p| p.position == still.nominal.position));

        let model = TargetMotionModel { kind: MotionKind::ConstantAcceleration, ..TargetMotionModel::default() };
        let mut n = nominal(Vector3::zeros(), Vector3::zeros());
        n.acceleration = Vector3::new(0.0, 0.0, 0.2);
        let ca = ErrorFilterState::new(model, n, &InitialUncertainty::default(), 0.005, 0.01).unwrap();
        let e = extrapolate(&ca, 0.5, 20).unwrap();
        assert_abs_diff_eq!(e.last_pose().position.z, 0.025, epsilon = 1e-12);

        assert!(extrapolate(&f, 0.0, 5).is_err());
        assert!(extrapolate(&f, 2.5, 5).is_err());
    }

    #[test]
    fn infinite_r_then_predict_equals_predict() {
        let f = cv_filter();
        let mut z = Measurement::position(Vector3::new(1.0, 1.0, 1.0), 0.0);
        z.r_override = Some(DMatrix::identity(3, 3) * 1e11);
        let a = predict(&update(&f, &z).unwrap().state, 0.2).unwrap();
        let b = predict(&f, 0.2).unwrap();
        assert_abs_diff_eq!(a.nominal.position, b.nominal.position, epsilon = 1e-6);
        assert!((a.covariance - b.covariance).amax() < 1e-6);
    }
}
