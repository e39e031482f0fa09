//! Quadrotor plant with four rotor thrust inputs and the cascaded PD
//! position/attitude controller.
//!
//! Rotor layout follows the moment structure `Mx = l(F2 - F4)`,
//! `My = l(F1 - F3)` and `Mz = c_d(F1 - F2 + F3 - F4)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{EulerAngles, UnitQuaternion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavParams {
    pub mass_kg: f64,
    /// Added point mass of a suspended payload at the airframe origin.
    pub payload_mass_kg: f64,
    pub arm_length_m: f64,
    pub inertia_kg_m2: [f64; 3],
    pub gravity_m_s2: f64,
    /// Yaw drag torque per newton of rotor thrust.
    pub drag_torque_coeff_m: f64,
    pub max_rotor_thrust_n: f64,
    pub envelope_min_m: [f64; 3],
    pub envelope_max_m: [f64; 3],
}

impl Default for UavParams {
    fn default() -> Self {
        Self {
            mass_kg: 1.5,
            payload_mass_kg: 0.0,
            arm_length_m: 0.25,
            inertia_kg_m2: [0.02, 0.02, 0.04],
            gravity_m_s2: 9.81,
            drag_torque_coeff_m: 0.016,
            max_rotor_thrust_n: 9.0,
            envelope_min_m: [-5.0, -5.0, 0.0],
            envelope_max_m: [5.0, 5.0, 6.0],
        }
    }
}

impl UavParams {
    pub fn total_mass(&self) -> f64 {
        self.mass_kg + self.payload_mass_kg
    }

    pub fn hover_thrust(&self) -> f64 {
        self.total_mass() * self.gravity_m_s2
    }

    pub fn validate(&self) -> Result<()> {
        let [jx, jy, jz] = self.inertia_kg_m2;
        let positive = [self.mass_kg, self.arm_length_m, jx, jy, jz, self.gravity_m_s2, self.drag_torque_coeff_m, self.max_rotor_thrust_n];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) || self.payload_mass_kg < 0.0 {
            return Err(Error::Config("uav parameters must be strictly positive".into()));
        }
        if jz < jx.max(jy) {
            return Err(Error::Config("uav inertia must satisfy J_z >= max(J_x, J_y)".into()));
        }
        if 4.0 * self.max_rotor_thrust_n <= self.hover_thrust() {
            return Err(Error::Config("uav rotor limits cannot sustain hover".into()));
        }
        if (0..3).any(|i| self.envelope_min_m[i] >= self.envelope_max_m[i]) {
            return Err(Error::Config("uav flight envelope is empty".into()));
        }
        Ok(())
    }

    pub fn in_envelope(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.envelope_min_m[i] && p[i] <= self.envelope_max_m[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion,
    /// Body rates p, q, r.
    pub body_rates: Vector3<f64>,
}

impl UavState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            body_rates: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain(self.body_rates.iter()).all(|v| v.is_finite())
            && self.orientation.is_finite()
    }
}

/// Individual rotor thrusts F1..F4 in newtons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RotorCommand(pub [f64; 4]);

impl RotorCommand {
    pub fn hover(params: &UavParams) -> Self {
        Self([params.hover_thrust() / 4.0; 4])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Body moments `(Mx, My, Mz)` produced by these thrusts.
    pub fn moments(&self, params: &UavParams) -> Vector3<f64> {
        let [f1, f2, f3, f4] = self.0;
        let l = params.arm_length_m;
        Vector3::new(l * (f2 - f4), l * (f1 - f3), params.drag_torque_coeff_m * (f1 - f2 + f3 - f4))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|f| f.is_finite())
    }
}

/// Maps collective thrust and body moments onto the four rotors (unclamped).
pub fn allocate(thrust: f64, moments: &Vector3<f64>, params: &UavParams) -> RotorCommand {
    let l = params.arm_length_m;
    let yaw = moments.z / params.drag_torque_coeff_m;
    let odd = 0.5 * (thrust + yaw); // F1 + F3
    let even = 0.5 * (thrust - yaw); // F2 + F4
    RotorCommand([
        0.5 * (odd + moments.y / l),
        0.5 * (even + moments.x / l),
        0.5 * (odd - moments.y / l),
        0.5 * (even - moments.x / l),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// Quaternion rate as (w, x, y, z).
    pub orientation_rate: [f64; 4],
    pub angular_acceleration: Vector3<f64>,
}

pub fn uav_derivative(state: &UavState, cmd: &RotorCommand, params: &UavParams) -> Result<UavDerivative> {
    if !state.is_finite() || !cmd.is_finite() {
        return Err(Error::NumericInput("uav state or rotor command"));
    }
    let r = state.orientation.to_rotation();
    let thrust = Vector3::new(0.0, 0.0, cmd.total());
    let acceleration = r * thrust / params.total_mass() - Vector3::new(0.0, 0.0, params.gravity_m_s2);

    let [jx, jy, jz] = params.inertia_kg_m2;
    let m = cmd.moments(params);
    let (p, q, rr) = (state.body_rates.x, state.body_rates.y, state.body_rates.z);
    let angular_acceleration = Vector3::new(
        (m.x - (jz - jy) * q * rr) / jx,
        (m.y - (jx - jz) * p * rr) / jy,
        (m.z - (jy - jx) * p * q) / jz,
    );

    let o = &state.orientation;
    // q_dot = 0.5 * q ⊗ (0, ω)
    let orientation_rate = [
        0.5 * (-o.x * p - o.y * q - o.z * rr),
        0.5 * (o.w * p + o.y * rr - o.z * q),
        0.5 * (o.w * q - o.x * rr + o.z * p),
        0.5 * (o.w * rr + o.x * q - o.y * p),
    ];
    Ok(UavDerivative { velocity: state.velocity, acceleration, orientation_rate, angular_acceleration })
}

fn advance(s: &UavState, d: &UavDerivative, h: f64) -> UavState {
    let o = &s.orientation;
    UavState {
        position: s.position + d.velocity * h,
        velocity: s.velocity + d.acceleration * h,
        // unnormalized intermediate; renormalized by the caller of the full step
        orientation: UnitQuaternion {
            w: o.w + d.orientation_rate[0] * h,
            x: o.x + d.orientation_rate[1] * h,
            y: o.y + d.orientation_rate[2] * h,
            z: o.z + d.orientation_rate[3] * h,
        },
        body_rates: s.body_rates + d.angular_acceleration * h,
    }
}

/// Largest integration step accepted by [`integrate_uav`].
pub const MAX_UAV_STEP: f64 = 0.02;

/// One classical RK4 step with the command held constant.
pub fn integrate_uav(state: &UavState, cmd: &RotorCommand, params: &UavParams, dt: f64) -> Result<UavState> {
    if !(dt > 0.0 && dt <= MAX_UAV_STEP) {
        return Err(Error::Config(format!("uav integration step {dt} outside (0, {MAX_UAV_STEP}]")));
    }
    let k1 = uav_derivative(state, cmd, params)?;
    let k2 = uav_derivative(&advance(state, &k1, 0.5 * dt), cmd, params)?;
    let k3 = uav_derivative(&advance(state, &k2, 0.5 * dt), cmd, params)?;
    let k4 = uav_derivative(&advance(state, &k3, dt), cmd, params)?;
    let combine = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    let v3 = |f: fn(&UavDerivative) -> Vector3<f64>| {
        (f(&k1) + 2.0 * f(&k2) + 2.0 * f(&k3) + f(&k4)) / 6.0
    };
    let dq: [f64; 4] = std::array::from_fn(|i| {
        combine(k1.orientation_rate[i], k2.orientation_rate[i], k3.orientation_rate[i], k4.orientation_rate[i])
    });
    let o = &state.orientation;
    let orientation = UnitQuaternion::new_normalize(o.w + dt * dq[0], o.x + dt * dq[1], o.y + dt * dq[2], o.z + dt * dq[3])?;
    let next = UavState {
        position: state.position + dt * v3(|d| d.velocity),
        velocity: state.velocity + dt * v3(|d| d.acceleration),
        orientation,
        body_rates: state.body_rates + dt * v3(|d| d.angular_acceleration),
    };
    if !next.is_finite() {
        return Err(Error::NumericInput("uav integration result"));
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdGains {
    /// Outer position loop, per axis x, y, z.
    pub position_kp: [f64; 3],
    pub position_kd: [f64; 3],
    /// Inner attitude loop, per axis roll, pitch, yaw.
    pub attitude_kp: [f64; 3],
    pub attitude_kd: [f64; 3],
    /// Time constant of the first-order filter on the position-error derivative.
    pub derivative_filter_s: f64,
    /// Tilt command saturation.
    pub max_tilt_rad: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            position_kp: [1.6, 1.6, 4.0],
            position_kd: [2.2, 2.2, 3.0],
            attitude_kp: [60.0, 60.0, 10.0],
            attitude_kd: [14.0, 14.0, 5.0],
            derivative_filter_s: 0.05,
            max_tilt_rad: 0.35,
        }
    }
}

impl PdGains {
    pub fn zero() -> Self {
        Self {
            position_kp: [0.0; 3],
            position_kd: [0.0; 3],
            attitude_kp: [0.0; 3],
            attitude_kd: [0.0; 3],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.position_kp.iter().chain(&self.position_kd).chain(&self.attitude_kp).chain(&self.attitude_kd);
        if all.clone().any(|g| !g.is_finite() || *g < 0.0) || self.derivative_filter_s < 0.0 || self.max_tilt_rad <= 0.0 {
            return Err(Error::Config("pd gains must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Previous-error memory of the outer loop, threaded through [`cascaded_pd`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PdMemory {
    pub previous_error: Option<Vector3<f64>>,
    pub error_rate: Vector3<f64>,
}

/// Controller diagnostics for one invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdOutput {
    pub command: RotorCommand,
    pub memory: PdMemory,
    pub desired_attitude: EulerAngles,
    pub collective_thrust: f64,
    pub moments: Vector3<f64>,
}

/// Cascaded PD: position errors to tilt and thrust demands, attitude errors to
/// body moments, moments to rotor thrusts clamped to the rotor limits.
pub fn cascaded_pd(
    state: &UavState,
    reference_position: &Vector3<f64>,
    reference_yaw: f64,
    gains: &PdGains,
    params: &UavParams,
    memory: &PdMemory,
    dt: f64,
) -> Result<PdOutput> {
    if !(dt > 0.0) || !state.is_finite() {
        return Err(Error::NumericInput("cascaded_pd input"));
    }
    if !params.in_envelope(reference_position) {
        return Err(Error::Envelope { reference: [reference_position.x, reference_position.y, reference_position.z] });
    }
    let error = reference_position - state.position;
    let raw_rate = match memory.previous_error {
        Some(prev) => (error - prev) / dt,
        None => -state.velocity,
    };
    let alpha = if gains.derivative_filter_s > 0.0 { dt / (gains.derivative_filter_s + dt) } else { 1.0 };
    let error_rate = match memory.previous_error {
        Some(_) => memory.error_rate + alpha * (raw_rate - memory.error_rate),
        None => raw_rate,
    };
    let u = Vector3::from_fn(|i, _| gains.position_kp[i] * error[i] + gains.position_kd[i] * error_rate[i]);

    let g = params.gravity_m_s2;
    let attitude = state.orientation.to_euler();
    let (s, c) = attitude.yaw.sin_cos();
    // small-angle inversion of the translational equations
    let max_tilt = gains.max_tilt_rad;
    let pitch_d = ((u.x * c + u.y * s) / g).clamp(-max_tilt, max_tilt);
    let roll_d = ((u.x * s - u.y * c) / g).clamp(-max_tilt, max_tilt);
    let tilt = (attitude.roll.cos() * attitude.pitch.cos()).max(0.5);
    let thrust = params.total_mass() * (g + u.z) / tilt;

    let desired = EulerAngles::new(roll_d, pitch_d, reference_yaw);
    let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    let att_err = Vector3::new(desired.roll - attitude.roll, desired.pitch - attitude.pitch, wrap(desired.yaw - attitude.yaw));
    let inertia = Matrix3::from_diagonal(&Vector3::from(params.inertia_kg_m2));
    let rate_demand = Vector3::from_fn(|i, _| gains.attitude_kp[i] * att_err[i] - gains.attitude_kd[i] * state.body_rates[i]);
    let moments = inertia * rate_demand;

    let mut cmd = allocate(thrust, &moments, params);
    for f in cmd.0.iter_mut() {
        *f = f.clamp(0.0, params.max_rotor_thrust_n);
    }
    Ok(PdOutput {
        command: cmd,
        memory: PdMemory { previous_error: Some(error), error_rate },
        desired_attitude: desired,
        collective_thrust: thrust,
        moments,
    })
}
