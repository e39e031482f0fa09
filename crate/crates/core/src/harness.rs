//! Closed-loop trial runner, metrics and paired multi-trial campaigns.
//!
//! One trial steps, at a fixed tick: deck wave → target truth (or the UAV
//! closed loop) → noisy measurements → ESKF → target prediction → controller
//! → arm discrete model → capture state machine → log row.

use nalgebra::{Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{build_discrete_model, check_limits_tol, forward_kinematics, ArmModel, JointState, Joints};
use crate::control::{
    clamp_to_limits, fixed_horizon_step, shrinking_horizon_step, simple_following_step, AccelBound, CostWeights,
    FollowingGains, HorizonPlan, PlannerSettings, RhcState, AUDIT_TOL,
};
use crate::error::{Error, Result};
use crate::eskf::{self, ErrorFilterState, InitialUncertainty, Measurement, NominalState, TargetMotionModel};
use crate::frames::{pose_error, Pose6, UnitQuaternion};
use crate::mission::{capture_tick, CaptureObservation, CaptureState, CaptureThresholds, Phase, PhaseEvent, UavCommand};
use crate::rng::{derive_seed, stream, unit_from, SimRng};
use crate::uav::{cascaded_pd, integrate_uav, PdGains, PdMemory, UavParams, UavState};
use crate::wave::{base_transform, SeaStateConfig, WaveModel};

pub const SCHEMA_VERSION: u32 = 1;
/// Plant integration step; ticks and measurement periods are multiples of it.
pub const SIM_STEP_S: f64 = 0.005;
pub const TICK_RANGE_S: (f64, f64) = (0.01, 0.05);
pub const MAX_DURATION_S: f64 = 600.0;

const STREAM_SEA: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_MEASUREMENT: u64 = 3;
const STREAM_UAV_SENSOR: u64 = 4;
const STREAM_CAMPAIGN_TILT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    SimpleFollowing,
    FixedHorizon,
    ShrinkingHorizon,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::SimpleFollowing => "simple_following",
            ControllerKind::FixedHorizon => "fixed_horizon",
            ControllerKind::ShrinkingHorizon => "shrinking_horizon",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple_following" => Ok(Self::SimpleFollowing),
            "fixed_horizon" => Ok(Self::FixedHorizon),
            "shrinking_horizon" => Ok(Self::ShrinkingHorizon),
            other => Err(Error::Config(format!(
                "unknown controller `{other}` (expected simple_following, fixed_horizon or shrinking_horizon)"
            ))),
        }
    }
}

/// Target motion in the inertial frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetMotion {
    /// Fixed pose; `None` places it at the home end-effector pose.
    Static {
        #[serde(default)]
        position_m: Option<[f64; 3]>,
    },
    /// Constant-speed circle in the plane normal to `plane_normal`, starting at
    /// a seed-drawn phase.
    Circular { radius_m: f64, speed_m_s: f64, center_m: [f64; 3], plane_normal: [f64; 3] },
    /// Ornstein–Uhlenbeck velocity, speed-capped, reflected inside a ball.
    Random {
        mean_reversion_per_s: f64,
        volatility_m_s15: f64,
        speed_cap_m_s: f64,
        center_m: [f64; 3],
        bound_radius_m: f64,
    },
    /// Cargo rigidly offset below a quadrotor hovering under its cascaded PD
    /// loop, with a slow lateral sway of the hover reference.
    UavClosedLoop {
        hover_reference_m: [f64; 3],
        cargo_offset_m: [f64; 3],
        sway_amplitude_m: f64,
        sway_period_s: f64,
        position_noise_m: f64,
    },
}

impl TargetMotion {
    pub fn default_circular() -> Self {
        TargetMotion::Circular { radius_m: 0.3, speed_m_s: 0.75, center_m: [0.49, 0.0, 0.60], plane_normal: [1.0, 0.0, 0.0] }
    }

    pub fn default_random() -> Self {
        TargetMotion::Random {
            mean_reversion_per_s: 1.0,
            volatility_m_s15: 0.4,
            speed_cap_m_s: 0.5,
            center_m: [0.49, 0.0, 0.60],
            bound_radius_m: 0.2,
        }
    }

    pub fn default_uav() -> Self {
        TargetMotion::UavClosedLoop {
            hover_reference_m: [0.49, 0.0, 2.60],
            cargo_offset_m: [0.0, 0.0, -2.0],
            sway_amplitude_m: 0.1,
            sway_period_s: 8.0,
            position_noise_m: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("scenario.target: {what}")));
        match self {
            TargetMotion::Static { position_m } => {
                if position_m.is_some_and(|p| p.iter().any(|v| !v.is_finite())) {
                    return bad("position must be finite");
                }
            }
            TargetMotion::Circular { radius_m, speed_m_s, center_m, plane_normal } => {
                if !(*radius_m > 0.0) || !(*speed_m_s >= 0.0) || center_m.iter().any(|v| !v.is_finite()) {
                    return bad("circular target needs radius > 0, speed >= 0 and a finite center");
                }
                if !(Vector3::from(*plane_normal).norm() > 1e-9) {
                    return bad("plane_normal must be nonzero");
                }
            }
            TargetMotion::Random { mean_reversion_per_s, volatility_m_s15, speed_cap_m_s, bound_radius_m, center_m } => {
                if !(*mean_reversion_per_s >= 0.0 && *volatility_m_s15 >= 0.0 && *speed_cap_m_s > 0.0 && *bound_radius_m > 0.0)
                    || center_m.iter().any(|v| !v.is_finite())
                {
                    return bad("random target parameters must be nonnegative with positive speed cap and bound");
                }
            }
            TargetMotion::UavClosedLoop { sway_period_s, sway_amplitude_m, position_noise_m, .. } => {
                if !(*sway_period_s > 0.0 && *sway_amplitude_m >= 0.0 && *position_noise_m >= 0.0) {
                    return bad("uav target needs positive sway period and nonnegative amplitude and noise");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EskfSettings {
    pub model: TargetMotionModel,
    pub initial: InitialUncertainty,
    pub position_sigma_m: f64,
    pub orientation_sigma_rad: f64,
    pub measurement_rate_hz: f64,
    pub measure_orientation: bool,
    /// Lead of the logged target prediction, s.
    pub prediction_lead_s: f64,
}

impl Default for EskfSettings {
    fn default() -> Self {
        Self {
            model: TargetMotionModel {
                kind: eskf::MotionKind::ConstantAcceleration,
                process_density: 50.0,
                attitude_density: 1e-4,
            },
            initial: InitialUncertainty::default(),
            position_sigma_m: 0.005,
            orientation_sigma_rad: 0.5f64.to_radians(),
            measurement_rate_hz: 100.0,
            measure_orientation: true,
            prediction_lead_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSettings {
    pub kind: ControllerKind,
    pub horizon_steps: usize,
    /// Shrinking windows roll over at this many remaining steps.
    pub min_horizon_steps: usize,
    pub weights: CostWeights,
    /// `Q ← Q·(1 + κ·roll_amplitude/reference_roll)`.
    pub severity_gain: f64,
    pub reference_roll_rad: f64,
    pub max_relinearizations: usize,
    /// Pull of every joint toward the home posture; stays off the task cost.
    pub posture_weight: f64,
    pub accel_bound: AccelBound,
    pub following: FollowingGains,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            kind: ControllerKind::ShrinkingHorizon,
            horizon_steps: 20,
            min_horizon_steps: 5,
            weights: CostWeights::diagonal(
                [1000.0, 1000.0, 1000.0, 2500.0, 2500.0, 2500.0],
                [1e-2; 7],
                [10000.0, 10000.0, 10000.0, 25000.0, 25000.0, 25000.0],
            ),
            severity_gain: 0.5,
            reference_roll_rad: 5f64.to_radians(),
            max_relinearizations: 3,
            posture_weight: 1.0,
            accel_bound: AccelBound::Box,
            following: FollowingGains::default(),
        }
    }
}

impl ControllerSettings {
    pub fn adapted_weights(&self, roll_amplitude: f64, home: &Joints) -> CostWeights {
        self.weights
            .with_tracking_scale(1.0 + self.severity_gain * roll_amplitude / self.reference_roll_rad)
            .with_posture([self.posture_weight; 7], home)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionSettings {
    pub thresholds: CaptureThresholds,
    /// Retract goal below the latch point (deck z), m.
    pub retract_depth_m: f64,
    /// Holding region: deck z at least this far below the latch point, m.
    pub holding_depth_m: f64,
}

impl Default for MissionSettings {
    fn default() -> Self {
        Self { thresholds: CaptureThresholds::default(), retract_depth_m: 0.15, holding_depth_m: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sea_state: SeaStateConfig,
    pub target: TargetMotion,
    /// Inertial orientation of the grasp frame on the target.
    pub target_orientation: UnitQuaternion,
    pub arm: ArmModel,
    pub uav: UavParams,
    pub uav_gains: PdGains,
    pub eskf: EskfSettings,
    pub controller: ControllerSettings,
    pub mission: MissionSettings,
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    /// Record wall-clock solve times (breaks byte-identical logs).
    pub record_timing: bool,
    pub stop_at_done: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            sea_state: SeaStateConfig::default(),
            target: TargetMotion::default_circular(),
            target_orientation: home_flange_orientation(&ArmModel::default()),
            arm: ArmModel::default(),
            uav: UavParams::default(),
            uav_gains: PdGains::default(),
            eskf: EskfSettings::default(),
            controller: ControllerSettings::default(),
            mission: MissionSettings::default(),
            duration_s: 10.0,
            tick_s: 0.025,
            seed: 1,
            record_timing: false,
            stop_at_done: true,
        }
    }
}

impl Scenario {
    /// Indoor servo platform: ±10° roll only, replanned every 0.05 s. The
    /// coarse tick keeps captures reliable up to about 0.5 m/s.
    pub fn indoor_servo() -> Self {
        let mut s = Scenario::default();
        s.sea_state.roll_amplitude = 10f64.to_radians();
        s.sea_state.pitch_amplitude = 0.0;
        s.sea_state.heave_amplitude = 0.0;
        s.tick_s = 0.05;
        s.controller.horizon_steps = 20;
        s.controller.min_horizon_steps = 5;
        s
    }
}

/// Flange orientation at the home posture on a level deck.
pub fn home_flange_orientation(arm: &ArmModel) -> UnitQuaternion {
    forward_kinematics(arm, &arm.home(), &Pose6::identity()).orientation
}

fn steps_of(period: f64, what: &str) -> Result<usize> {
    let n = (period / SIM_STEP_S).round();
    if !(n >= 1.0) || (n * SIM_STEP_S - period).abs() > 1e-9 {
        return Err(Error::Config(format!("{what} {period} s is not a multiple of the {SIM_STEP_S} s plant step")));
    }
    Ok(n as usize)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.sea_state.validate()?;
        self.target.validate()?;
        self.arm.validate()?;
        self.uav.validate()?;
        self.uav_gains.validate()?;
        self.controller.weights.validate()?;
        self.controller.following_validate()?;
        self.mission.thresholds.validate()?;
        if !(self.tick_s >= TICK_RANGE_S.0 - 1e-12 && self.tick_s <= TICK_RANGE_S.1 + 1e-12) {
            return Err(Error::Config(format!("scenario.tick_s {} outside [{}, {}]", self.tick_s, TICK_RANGE_S.0, TICK_RANGE_S.1)));
        }
        steps_of(self.tick_s, "scenario.tick_s")?;
        if !(self.duration_s > 0.0 && self.duration_s <= MAX_DURATION_S) {
            return Err(Error::Config(format!("scenario.duration_s {} outside (0, {MAX_DURATION_S}]", self.duration_s)));
        }
        if !(self.eskf.measurement_rate_hz > 0.0) {
            return Err(Error::Config("eskf.measurement_rate_hz must be positive".into()));
        }
        steps_of(1.0 / self.eskf.measurement_rate_hz, "eskf measurement period")?;
        if !(self.eskf.position_sigma_m > 0.0 && self.eskf.orientation_sigma_rad > 0.0) {
            return Err(Error::Config("eskf measurement sigmas must be positive".into()));
        }
        if !(self.eskf.prediction_lead_s > 0.0 && self.eskf.prediction_lead_s <= 2.0) {
            return Err(Error::Config("eskf.prediction_lead_s must lie in (0, 2]".into()));
        }
        let h = self.controller.horizon_steps;
        if !(1..=crate::control::MAX_HORIZON).contains(&h) {
            return Err(Error::Config(format!("controller.horizon_steps {h} outside 1..=100")));
        }
        if !(1..=h).contains(&self.controller.min_horizon_steps) {
            return Err(Error::Config("controller.min_horizon_steps must lie in 1..=horizon_steps".into()));
        }
        if !(1..=10).contains(&self.controller.max_relinearizations) {
            return Err(Error::Config("controller.max_relinearizations must lie in 1..=10".into()));
        }
        if !(self.mission.retract_depth_m > self.mission.holding_depth_m && self.mission.holding_depth_m > 0.0) {
            return Err(Error::Config("mission.retract_depth_m must exceed holding_depth_m > 0".into()));
        }
        Ok(())
    }

    pub fn planner_settings(&self) -> PlannerSettings {
        PlannerSettings {
            dt: self.tick_s,
            max_passes: self.controller.max_relinearizations,
            accel_bound: self.controller.accel_bound,
            ..PlannerSettings::default()
        }
    }
}

impl ControllerSettings {
    fn following_validate(&self) -> Result<()> {
        let g = &self.following;
        let all = [g.kp_position_per_s2, g.kp_orientation_per_s2, g.kd_linear_per_s, g.kd_angular_per_s, g.damping];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("controller.following gains must be finite and >= 0".into()));
        }
        if !(self.posture_weight.is_finite() && self.posture_weight >= 0.0) {
            return Err(Error::Config("controller.posture_weight must be finite and >= 0".into()));
        }
        if !(self.severity_gain >= 0.0 && self.reference_roll_rad > 0.0) {
            return Err(Error::Config("controller severity adaptation needs gain >= 0 and reference roll > 0".into()));
        }
        Ok(())
    }
}

/// One logged tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub t: f64,
    pub phase: Phase,
    pub target_truth: Pose6,
    pub target_estimate: Pose6,
    /// Estimated target position `prediction_lead_s` ahead.
    pub target_prediction: [f64; 3],
    pub q: Joints,
    pub q_dot: Joints,
    pub ee_pose: Pose6,
    /// `‖v_ee − v̂_target‖` seen by the capture gate, m/s.
    pub relative_speed_m_s: f64,
    pub deck_roll_rad: f64,
    pub deck_pitch_rad: f64,
    pub deck_heave_m: f64,
    pub horizon: usize,
    pub plan_cost: Option<f64>,
    pub plan_passes: usize,
    pub plan_feasible: Option<bool>,
    pub kkt_residual: Option<f64>,
    /// Independent re-check of a feasible-flagged plan; `None` without a plan.
    pub audit_ok: Option<bool>,
    pub fallback: bool,
    pub solve_time_s: Option<f64>,
    /// Applied control and resulting state satisfy the joint limits.
    pub applied_within_limits: bool,
}

/// Reduction of a trial's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub success: bool,
    pub final_phase: Phase,
    pub time_to_capture_s: Option<f64>,
    pub misses: usize,
    pub metrics_applicable: bool,
    pub window_ticks: usize,
    pub rms_position_error_m: Option<f64>,
    pub mean_position_error_m: Option<f64>,
    pub max_orientation_error_deg: Option<f64>,
    pub mean_orientation_error_deg: Option<f64>,
    pub mean_solve_time_s: Option<f64>,
    pub max_solve_time_s: Option<f64>,
    pub planned_ticks: usize,
    pub feasible_ticks: usize,
    pub audit_failures: usize,
    pub fallback_ticks: usize,
    pub max_kkt_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub row_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub controller: ControllerKind,
    pub seed: u64,
    pub roll_amplitude_rad: f64,
    pub rows: Vec<TrialRow>,
    pub events: Vec<PhaseEvent>,
    pub summary: TrialSummary,
    pub failure: Option<TrialFailure>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn max_of(values: &[f64]) -> Option<f64> {
    values.iter().copied().reduce(f64::max)
}

/// Capture-window row range (inclusive start, exclusive end): from 0.5 s
/// before the first `Grasp` tick to the first `Retrieve` tick; without a grasp,
/// from the first `ApproachAlign` tick to the end.
pub fn capture_window(rows: &[TrialRow]) -> Option<(usize, usize)> {
    let first = |p: Phase| rows.iter().position(|r| r.phase == p);
    match first(Phase::Grasp) {
        Some(g) => {
            let t0 = rows[g].t - 0.5;
            let start = rows.iter().position(|r| r.t >= t0 - 1e-9).unwrap_or(g);
            let end = first(Phase::Retrieve).unwrap_or(rows.len()).max(g + 1);
            Some((start, end))
        }
        None => first(Phase::ApproachAlign).map(|a| (a, rows.len())),
    }
}

/// Reduces rows to the trial summary; a pure function of `rows`.
pub fn compute_metrics(rows: &[TrialRow]) -> TrialSummary {
    let final_phase = rows.last().map(|r| r.phase).unwrap_or(Phase::PoseSync);
    let done = rows.iter().find(|r| r.phase == Phase::Done);
    let misses = rows.windows(2).filter(|w| w[0].phase == Phase::Grasp && w[1].phase == Phase::InterceptPlan).count();

    let window = capture_window(rows);
    let (mut pos, mut ori) = (Vec::new(), Vec::new());
    if let Some((a, b)) = window {
        for r in &rows[a..b] {
            let e = pose_error(&r.ee_pose, &r.target_truth);
            pos.push(e.fixed_rows::<3>(0).norm());
            ori.push(e.fixed_rows::<3>(3).norm().to_degrees());
        }
    }
    let applicable = !pos.is_empty();
    let rms = applicable.then(|| (pos.iter().map(|e| e * e).sum::<f64>() / pos.len() as f64).sqrt());
    let times: Vec<f64> = rows.iter().filter_map(|r| r.solve_time_s).collect();
    let kkt: Vec<f64> = rows.iter().filter_map(|r| r.kkt_residual).filter(|v| v.is_finite()).collect();

    TrialSummary {
        success: done.is_some(),
        final_phase,
        time_to_capture_s: done.map(|r| r.t),
        misses,
        metrics_applicable: applicable,
        window_ticks: pos.len(),
        rms_position_error_m: rms,
        mean_position_error_m: mean(&pos),
        max_orientation_error_deg: max_of(&ori),
        mean_orientation_error_deg: mean(&ori),
        mean_solve_time_s: mean(&times),
        max_solve_time_s: max_of(&times),
        planned_ticks: rows.iter().filter(|r| r.plan_feasible.is_some()).count(),
        feasible_ticks: rows.iter().filter(|r| r.plan_feasible == Some(true)).count(),
        audit_failures: rows.iter().filter(|r| r.audit_ok == Some(false)).count(),
        fallback_ticks: rows.iter().filter(|r| r.fallback).count(),
        max_kkt_residual: max_of(&kkt),
    }
}

fn gaussian3(rng: &mut SimRng, sigma: f64) -> Vector3<f64> {
    Vector3::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * sigma
}

fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = normal.normalize();
    let helper = if n.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

enum TargetSim {
    Static { position: Vector3<f64> },
    Circular { center: Vector3<f64>, e1: Vector3<f64>, e2: Vector3<f64>, radius: f64, omega: f64, phase: f64 },
    Random { position: Vector3<f64>, velocity: Vector3<f64>, center: Vector3<f64>, theta: f64, sigma: f64, cap: f64, bound: f64, rng: SimRng },
    Uav(Box<UavTarget>),
}

struct UavTarget {
    state: UavState,
    memory: PdMemory,
    reference0: Vector3<f64>,
    offset: Vector3<f64>,
    sway_amplitude: f64,
    sway_omega: f64,
    /// Sway clock; frozen while the arm asks for reduced lateral velocity.
    sway_clock: f64,
    noise: f64,
    rng: SimRng,
    params: UavParams,
    gains: PdGains,
}

impl UavTarget {
    fn reference(&self) -> Vector3<f64> {
        self.reference0 + Vector3::y() * (self.sway_amplitude * (self.sway_omega * self.sway_clock).sin())
    }
}

impl TargetSim {
    fn new(scenario: &Scenario) -> Result<Self> {
        let seed = derive_seed(scenario.seed, STREAM_TARGET);
        Ok(match &scenario.target {
            TargetMotion::Static { position_m } => {
                let position = match position_m {
                    Some(p) => Vector3::from(*p),
                    None => forward_kinematics(&scenario.arm, &scenario.arm.home(), &Pose6::identity()).position,
                };
                TargetSim::Static { position }
            }
            TargetMotion::Circular { radius_m, speed_m_s, center_m, plane_normal } => {
                let (e1, e2) = plane_basis(&Vector3::from(*plane_normal));
                TargetSim::Circular {
                    center: Vector3::from(*center_m),
                    e1,
                    e2,
                    radius: *radius_m,
                    omega: speed_m_s / radius_m,
                    phase: std::f64::consts::TAU * unit_from(seed, 0),
                }
            }
            TargetMotion::Random { mean_reversion_per_s, volatility_m_s15, speed_cap_m_s, center_m, bound_radius_m } => {
                let mut rng = stream(seed, 0);
                let center = Vector3::from(*center_m);
                let start = gaussian3(&mut rng, 0.5 * bound_radius_m);
                let start = if start.norm() > *bound_radius_m { start * (bound_radius_m / start.norm()) } else { start };
                TargetSim::Random {
                    position: center + start,
                    velocity: Vector3::zeros(),
                    center,
                    theta: *mean_reversion_per_s,
                    sigma: *volatility_m_s15,
                    cap: *speed_cap_m_s,
                    bound: *bound_radius_m,
                    rng,
                }
            }
            TargetMotion::UavClosedLoop { hover_reference_m, cargo_offset_m, sway_amplitude_m, sway_period_s, position_noise_m } => {
                let reference0 = Vector3::from(*hover_reference_m);
                if !scenario.uav.in_envelope(&reference0) {
                    return Err(Error::Envelope { reference: *hover_reference_m });
                }
                TargetSim::Uav(Box::new(UavTarget {
                    state: UavState::at_rest(reference0),
                    memory: PdMemory::default(),
                    reference0,
                    offset: Vector3::from(*cargo_offset_m),
                    sway_amplitude: *sway_amplitude_m,
                    sway_omega: std::f64::consts::TAU / sway_period_s,
                    sway_clock: 0.0,
                    noise: *position_noise_m,
                    rng: stream(derive_seed(scenario.seed, STREAM_UAV_SENSOR), 0),
                    params: scenario.uav.clone(),
                    gains: scenario.uav_gains.clone(),
                }))
            }
        })
    }

    fn position_at(&self, t: f64) -> Vector3<f64> {
        match self {
            TargetSim::Static { position } => *position,
            TargetSim::Circular { center, e1, e2, radius, omega, phase } => {
                let a = phase + omega * t;
                center + (e1 * a.cos() + e2 * a.sin()) * *radius
            }
            TargetSim::Random { position, .. } => *position,
            TargetSim::Uav(u) => u.state.position + u.offset,
        }
    }

    /// Advances the truth from `t` to `t + SIM_STEP_S`.
    fn step(&mut self, t: f64, hold_lateral: bool) -> Result<()> {
        let h = SIM_STEP_S;
        match self {
            TargetSim::Static { .. } | TargetSim::Circular { .. } => {}
            TargetSim::Random { position, velocity, center, theta, sigma, cap, bound, rng } => {
                *velocity += -*velocity * (*theta * h) + gaussian3(rng, *sigma * h.sqrt());
                let speed = velocity.norm();
                if speed > *cap {
                    *velocity *= *cap / speed;
                }
                *position += *velocity * h;
                let offset = *position - *center;
                let r = offset.norm();
                if r > *bound {
                    let n = offset / r;
                    *position = *center + n * (2.0 * *bound - r);
                    let outward = velocity.dot(&n);
                    if outward > 0.0 {
                        *velocity -= n * (2.0 * outward);
                    }
                }
            }
            TargetSim::Uav(u) => {
                if !hold_lateral {
                    u.sway_clock += h;
                }
                let reference = u.reference();
                let mut sensed = u.state;
                sensed.position += gaussian3(&mut u.rng, u.noise);
                let out = cascaded_pd(&sensed, &reference, 0.0, &u.gains, &u.params, &u.memory, h)?;
                u.memory = out.memory;
                u.state = integrate_uav(&u.state, &out.command, &u.params, h)?;
                let _ = t;
            }
        }
        Ok(())
    }
}

/// Inertial end-effector pose and a central-difference twist estimate.
fn ee_motion(model: &ArmModel, z: &JointState, wave: &WaveModel, t: f64) -> (Pose6, Vector3<f64>) {
    let base = base_transform(&wave.pose_at(t));
    let pose = forward_kinematics(model, &z.q, &base);
    let d = 1e-4;
    let ahead = forward_kinematics(model, &(z.q + z.q_dot * d), &base_transform(&wave.pose_at(t + d)));
    let behind = forward_kinematics(model, &(z.q - z.q_dot * d), &base_transform(&wave.pose_at(t - d)));
    (pose, (ahead.position - behind.position) / (2.0 * d))
}

enum Goal {
    Track,
    Retract { deck_goal: Pose6, latch_deck_z: f64 },
}

struct ControllerRuntime {
    kind: ControllerKind,
    weights: CostWeights,
    settings: PlannerSettings,
    rhc: RhcState,
    previous: Option<HorizonPlan>,
}

/// Runs one closed-loop trial.
pub fn run_trial(scenario: &Scenario) -> Result<TrialRecord> {
    scenario.validate()?;
    let tick = scenario.tick_s;
    let steps_per_tick = steps_of(tick, "scenario.tick_s")?;
    let steps_per_measurement = steps_of(1.0 / scenario.eskf.measurement_rate_hz, "eskf measurement period")?;
    let dm = build_discrete_model(tick)?;
    let n_ticks = (scenario.duration_s / tick).round() as usize;

    let mut sea = scenario.sea_state.clone();
    sea.seed = derive_seed(scenario.seed, STREAM_SEA);
    let wave = sea.resolve();
    let mut target = TargetSim::new(scenario)?;
    let mut meas_rng = stream(derive_seed(scenario.seed, STREAM_MEASUREMENT), 0);
    let target_orientation = scenario.target_orientation;
    let model = &scenario.arm;
    let planner = scenario.planner_settings();
    let h_init = scenario.controller.horizon_steps;

    let mut ctrl = ControllerRuntime {
        kind: scenario.controller.kind,
        weights: scenario.controller.adapted_weights(scenario.sea_state.roll_amplitude, &model.home()),
        settings: planner,
        rhc: RhcState::new(h_init, 0.0, tick).with_min_horizon(scenario.controller.min_horizon_steps),
        previous: None,
    };

    let measure = |rng: &mut SimRng, truth: &Vector3<f64>, stamp: f64| -> Measurement {
        let position = truth + gaussian3(rng, scenario.eskf.position_sigma_m);
        if scenario.eskf.measure_orientation {
            let noise = UnitQuaternion::exp(&gaussian3(rng, scenario.eskf.orientation_sigma_rad));
            Measurement::pose(&Pose6::new(position, target_orientation.mul(&noise)), stamp)
        } else {
            Measurement::position(position, stamp)
        }
    };

    let first = measure(&mut meas_rng, &target.position_at(0.0), 0.0);
    let nominal = NominalState {
        position: first.position,
        velocity: Vector3::zeros(),
        acceleration: Vector3::zeros(),
        orientation: first.orientation.unwrap_or(target_orientation),
        stamp: 0.0,
    };
    let mut filter = ErrorFilterState::new(
        scenario.eskf.model.clone(),
        nominal,
        &scenario.eskf.initial,
        scenario.eskf.position_sigma_m,
        scenario.eskf.orientation_sigma_rad,
    )?;
    let mut last_measurement = 0.0;

    let mut z = JointState::at_rest(model.home());
    let mut capture = CaptureState::new(0.0);
    let mut goal = Goal::Track;
    let mut attached = false;
    let mut hold_lateral;
    let mut plan_ok_prev = false;
    let mut rows = Vec::with_capacity(n_ticks + 1);
    let mut events = Vec::new();
    let mut failure = None;
    let mut step_index: u64 = 0;

    for tick_index in 0..=n_ticks {
        let t = tick_index as f64 * tick;
        let base_pose = wave.pose_at(t);
        let base = base_transform(&base_pose);
        let (ee, ee_vel) = ee_motion(model, &z, &wave, t);
        let truth_position = if attached { ee.position } else { target.position_at(t) };
        let truth = Pose6::new(truth_position, if attached { ee.orientation } else { target_orientation });

        let now = eskf::predict_to(&filter, t)?;
        let estimate = now.nominal.pose();

        let obs = CaptureObservation {
            t,
            ee_pose: ee,
            ee_stamp: t,
            target_pose: estimate,
            target_stamp: last_measurement,
            relative_speed: (ee_vel - now.nominal.velocity).norm(),
            plan_feasible: plan_ok_prev,
            retracted: match &goal {
                Goal::Retract { latch_deck_z, .. } => {
                    base.inverse().transform_point(&ee.position).z <= latch_deck_z - scenario.mission.holding_depth_m
                }
                Goal::Track => false,
            },
        };
        let out = capture_tick(&capture, &obs, &scenario.mission.thresholds);
        hold_lateral = out.uav_commands.contains(&UavCommand::ReduceLateralVelocity);
        if let Some(ev) = out.event.clone() {
            if ev.to == Phase::Retrieve {
                let deck_ee = base.inverse().compose(&ee);
                let mut deck_goal = deck_ee;
                deck_goal.position.z -= scenario.mission.retract_depth_m;
                goal = Goal::Retract { deck_goal, latch_deck_z: deck_ee.position.z };
                attached = true;
            }
            if ev.to == Phase::InterceptPlan || ev.to == Phase::Grasp {
                ctrl.rhc = ctrl.rhc.reset(t, tick);
            }
            events.push(ev);
        }
        capture = out.state;

        // reference trajectory over the planning horizon
        let h = match ctrl.kind {
            ControllerKind::ShrinkingHorizon => ctrl.rhc.steps_remaining(t, tick).min(ctrl.rhc.h),
            _ => h_init,
        };
        let base_traj: Vec<Pose6> = (0..=h).map(|k| base_transform(&base_pose.extrapolate(k as f64 * tick))).collect();
        let (reference, reference_vel): (Vec<Pose6>, Vector6<f64>) = match &goal {
            Goal::Track => {
                let ex = eskf::extrapolate(&now, h as f64 * tick, h)?;
                let v = now.nominal.velocity;
                (ex.poses, Vector6::new(v.x, v.y, v.z, 0.0, 0.0, 0.0))
            }
            Goal::Retract { deck_goal, .. } => (base_traj.iter().map(|b| b.compose(deck_goal)).collect(), Vector6::zeros()),
        };
        let prediction = eskf::extrapolate(&now, scenario.eskf.prediction_lead_s, 1)?.last_pose().position;

        let mut row_plan: Option<HorizonPlan> = None;
        let u = if capture.phase.is_terminal() {
            Joints::zeros()
        } else {
            match ctrl.kind {
                ControllerKind::SimpleFollowing => {
                    plan_ok_prev = true;
                    simple_following_step(&z, &reference[0], &reference_vel, model, &base, &scenario.controller.following, tick)
                }
                ControllerKind::FixedHorizon => {
                    let (u0, plan) = fixed_horizon_step(&z, &reference, &base_traj, model, &ctrl.weights, h_init, ctrl.previous.as_ref(), &ctrl.settings)?;
                    row_plan = Some(plan);
                    u0
                }
                ControllerKind::ShrinkingHorizon => {
                    let (u0, plan, next) = shrinking_horizon_step(&ctrl.rhc, t, &z, &reference, &base_traj, model, &ctrl.weights, &ctrl.settings)?;
                    ctrl.rhc = next;
                    row_plan = Some(plan);
                    u0
                }
            }
        };

        let mut fallback = false;
        let mut audit_ok = None;
        let u = match &row_plan {
            Some(plan) => {
                plan_ok_prev = plan.feasible;
                if plan.feasible {
                    audit_ok = Some(independent_audit(model, &z, &plan.controls, &dm));
                    u
                } else {
                    fallback = true;
                    clamp_to_limits(model, &z, &u, tick)
                }
            }
            None => u,
        };
        let z_next = dm.step(&z, &u);
        let applied_within_limits = check_limits_tol(model, &z_next.q, &z_next.q_dot, &u, AUDIT_TOL)
            .violations
            .iter()
            .all(|v| matches!(v.kind, crate::arm::LimitKind::WorkspaceLow | crate::arm::LimitKind::WorkspaceHigh));

        rows.push(TrialRow {
            t,
            phase: capture.phase,
            target_truth: truth,
            target_estimate: estimate,
            target_prediction: prediction.into(),
            q: z.q,
            q_dot: z.q_dot,
            ee_pose: ee,
            relative_speed_m_s: obs.relative_speed,
            deck_roll_rad: base_pose.roll,
            deck_pitch_rad: base_pose.pitch,
            deck_heave_m: base_pose.heave,
            horizon: row_plan.as_ref().map_or(0, |p| p.horizon()),
            plan_cost: row_plan.as_ref().map(|p| p.cost),
            plan_passes: row_plan.as_ref().map_or(0, |p| p.passes),
            plan_feasible: row_plan.as_ref().map(|p| p.feasible),
            kkt_residual: row_plan.as_ref().and_then(|p| p.kkt_residual.is_finite().then_some(p.kkt_residual)),
            audit_ok,
            fallback,
            solve_time_s: if scenario.record_timing { row_plan.as_ref().map(|p| p.solve_time_s) } else { None },
            applied_within_limits,
        });
        if let Some(plan) = row_plan {
            ctrl.previous = Some(plan);
        }

        let finite = z_next.q.iter().chain(z_next.q_dot.iter()).all(|v| v.is_finite()) && truth.position.iter().all(|v| v.is_finite());
        if !finite {
            failure = Some(TrialFailure { row_index: rows.len() - 1, reason: "non-finite arm or target state".into() });
            break;
        }
        if capture.phase == Phase::Aborted || (capture.phase == Phase::Done && scenario.stop_at_done) || tick_index == n_ticks {
            break;
        }

        // advance plant, target and filter to the next tick
        z = z_next;
        for _ in 0..steps_per_tick {
            let ts = step_index as f64 * SIM_STEP_S;
            if let Err(e) = target.step(ts, hold_lateral) {
                failure = Some(TrialFailure { row_index: rows.len() - 1, reason: format!("target simulation: {e}") });
                break;
            }
            step_index += 1;
            if step_index % steps_per_measurement as u64 == 0 {
                let stamp = step_index as f64 * SIM_STEP_S;
                let truth_next = if attached {
                    forward_kinematics(model, &z.q, &base_transform(&wave.pose_at(stamp))).position
                } else {
                    target.position_at(stamp)
                };
                let zm = measure(&mut meas_rng, &truth_next, stamp);
                match eskf::update(&filter, &zm) {
                    Ok(o) => {
                        filter = o.state;
                        last_measurement = stamp;
                    }
                    Err(Error::SingularUpdate { .. }) => {}
                    Err(e) => {
                        failure = Some(TrialFailure { row_index: rows.len() - 1, reason: format!("filter: {e}") });
                        break;
                    }
                }
            }
        }
        if failure.is_some() {
            break;
        }
    }

    let mut summary = compute_metrics(&rows);
    if failure.is_some() {
        summary.success = false;
    }
    Ok(TrialRecord {
        controller: scenario.controller.kind,
        seed: scenario.seed,
        roll_amplitude_rad: scenario.sea_state.roll_amplitude,
        rows,
        events,
        summary,
        failure,
    })
}

/// Re-checks a plan by rolling it out with the arm module's discrete model.
fn independent_audit(model: &ArmModel, z0: &JointState, controls: &[Joints], dm: &crate::arm::DiscreteModel) -> bool {
    let mut z = *z0;
    controls.iter().all(|u| {
        z = dm.step(&z, u);
        check_limits_tol(model, &z.q, &z.q_dot, u, AUDIT_TOL).is_empty()
    })
}

/// Campaign request: `n_trials` paired seeds run under every controller.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub template: Scenario,
    pub n_trials: usize,
    pub controllers: Vec<ControllerKind>,
    pub master_seed: u64,
    /// Per-trial roll amplitude drawn uniformly from this range, rad.
    pub roll_amplitude_range: Option<(f64, f64)>,
    /// Circular target speeds cycled over trial indices; empty keeps the template.
    pub target_speeds_m_s: Vec<f64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl CampaignSpec {
    pub fn trial_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }

    /// Scenario for trial `index` under `controller`.
    pub fn scenario(&self, index: usize, controller: ControllerKind) -> Scenario {
        let mut s = self.template.clone();
        s.seed = self.trial_seed(index);
        s.controller.kind = controller;
        if let Some((lo, hi)) = self.roll_amplitude_range {
            s.sea_state.roll_amplitude = lo + (hi - lo) * unit_from(derive_seed(s.seed, STREAM_CAMPAIGN_TILT), 0);
        }
        if let (TargetMotion::Circular { speed_m_s, .. }, false) = (&mut s.target, self.target_speeds_m_s.is_empty()) {
            *speed_m_s = self.target_speeds_m_s[index % self.target_speeds_m_s.len()];
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerAggregate {
    pub controller: ControllerKind,
    pub n_trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rms_error_m: Option<f64>,
    pub median_rms_error_m: Option<f64>,
    pub mean_position_error_m: Option<f64>,
    pub mean_orientation_error_deg: Option<f64>,
    pub max_orientation_error_deg: Option<f64>,
    /// Over successful trials only.
    pub mean_time_to_capture_s: Option<f64>,
    /// Failed trials censored at the scenario duration.
    pub median_time_to_capture_s: Option<f64>,
    pub solve_time_p50_s: Option<f64>,
    pub solve_time_p95_s: Option<f64>,
    pub solve_time_max_s: Option<f64>,
    pub audit_failures: usize,
    pub fallback_ticks: usize,
    pub failed_trials: usize,
    /// Relative reduction of median time-to-capture vs the baseline, %.
    pub efficiency_gain_pct: Option<f64>,
    /// Relative reduction of median RMS error vs the baseline, %.
    pub precision_gain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub baseline: Option<ControllerKind>,
    /// Every controller ran on exactly `seeds`.
    pub paired: bool,
    pub controllers: Vec<ControllerAggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    /// `(controller, trial index, record)` in controller-major order.
    pub trials: Vec<(ControllerKind, usize, TrialRecord)>,
}

/// Linear-interpolated quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

fn aggregate(controller: ControllerKind, records: &[&TrialRecord], duration: f64) -> ControllerAggregate {
    let n = records.len();
    let successes = records.iter().filter(|r| r.summary.success).count();
    let collect = |f: &dyn Fn(&TrialSummary) -> Option<f64>| records.iter().filter_map(|r| f(&r.summary)).collect::<Vec<f64>>();
    let rms = collect(&|s| s.rms_position_error_m);
    let ttc_success = collect(&|s| s.time_to_capture_s);
    let ttc_censored: Vec<f64> = records.iter().map(|r| r.summary.time_to_capture_s.unwrap_or(duration)).collect();
    let solve: Vec<f64> = records.iter().flat_map(|r| r.rows.iter().filter_map(|row| row.solve_time_s)).collect();
    ControllerAggregate {
        controller,
        n_trials: n,
        successes,
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        mean_rms_error_m: mean(&rms),
        median_rms_error_m: quantile(&rms, 0.5),
        mean_position_error_m: mean(&collect(&|s| s.mean_position_error_m)),
        mean_orientation_error_deg: mean(&collect(&|s| s.mean_orientation_error_deg)),
        max_orientation_error_deg: max_of(&collect(&|s| s.max_orientation_error_deg)),
        mean_time_to_capture_s: mean(&ttc_success),
        median_time_to_capture_s: quantile(&ttc_censored, 0.5),
        solve_time_p50_s: quantile(&solve, 0.5),
        solve_time_p95_s: quantile(&solve, 0.95),
        solve_time_max_s: max_of(&solve),
        audit_failures: records.iter().map(|r| r.summary.audit_failures).sum(),
        fallback_ticks: records.iter().map(|r| r.summary.fallback_ticks).sum(),
        failed_trials: records.iter().filter(|r| r.failure.is_some()).count(),
        efficiency_gain_pct: None,
        precision_gain_pct: None,
    }
}

fn reduction_pct(baseline: Option<f64>, value: Option<f64>) -> Option<f64> {
    match (baseline, value) {
        (Some(b), Some(v)) if b > 0.0 => Some(100.0 * (b - v) / b),
        _ => None,
    }
}

/// Runs every `(controller, seed)` pair; results are independent of the
/// thread count.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignOutcome> {
    if spec.n_trials == 0 {
        return Err(Error::Config("campaign needs at least one trial".into()));
    }
    if spec.controllers.is_empty() {
        return Err(Error::Config("campaign needs at least one controller".into()));
    }
    if spec.target_speeds_m_s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("campaign target speeds must be positive and finite".into()));
    }
    if let Some((lo, hi)) = spec.roll_amplitude_range {
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::Config("campaign roll range must satisfy 0 <= lo <= hi".into()));
        }
    }
    spec.template.validate()?;
    let jobs: Vec<(ControllerKind, usize)> =
        spec.controllers.iter().flat_map(|&c| (0..spec.n_trials).map(move |i| (c, i))).collect();
    let run = || -> Vec<Result<TrialRecord>> { jobs.par_iter().map(|&(c, i)| run_trial(&spec.scenario(i, c))).collect() };
    let results = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut trials = Vec::with_capacity(jobs.len());
    for (&(c, i), r) in jobs.iter().zip(results) {
        trials.push((c, i, r?));
    }

    let seeds: Vec<u64> = (0..spec.n_trials).map(|i| spec.trial_seed(i)).collect();
    let paired = spec.controllers.iter().all(|&c| {
        let mut s: Vec<u64> = trials.iter().filter(|t| t.0 == c).map(|t| t.2.seed).collect();
        s.sort_unstable();
        let mut expected = seeds.clone();
        expected.sort_unstable();
        s == expected
    });
    let baseline = spec
        .controllers
        .iter()
        .copied()
        .find(|&c| c == ControllerKind::SimpleFollowing)
        .or_else(|| spec.controllers.first().copied());
    let mut aggregates: Vec<ControllerAggregate> = spec
        .controllers
        .iter()
        .map(|&c| {
            let recs: Vec<&TrialRecord> = trials.iter().filter(|t| t.0 == c).map(|t| &t.2).collect();
            aggregate(c, &recs, spec.template.duration_s)
        })
        .collect();
    if let Some(b) = baseline.and_then(|b| aggregates.iter().find(|a| a.controller == b).cloned()) {
        for a in aggregates.iter_mut() {
            a.efficiency_gain_pct = reduction_pct(b.median_time_to_capture_s, a.median_time_to_capture_s);
            a.precision_gain_pct = reduction_pct(b.median_rms_error_m, a.median_rms_error_m);
        }
    }
    Ok(CampaignOutcome {
        report: CampaignReport { schema_version: SCHEMA_VERSION, master_seed: spec.master_seed, seeds, baseline, paired, controllers: aggregates },
        trials,
    })
}

/// JSONL trial log: a header object, one object per row, then the summary.
pub fn trial_jsonl(record: &TrialRecord) -> String {
    #[derive(Serialize)]
    struct Header<'a> {
        record: &'static str,
        schema_version: u32,
        controller: ControllerKind,
        seed: u64,
        roll_amplitude_rad: f64,
        events: &'a [PhaseEvent],
    }
    #[derive(Serialize)]
    struct Row<'a> {
        record: &'static str,
        #[serde(flatten)]
        row: &'a TrialRow,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        record: &'static str,
        schema_version: u32,
        #[serde(flatten)]
        summary: &'a TrialSummary,
        failure: &'a Option<TrialFailure>,
    }
    let mut out = String::new();
    let mut push = |v: String| {
        out.push_str(&v);
        out.push('\n');
    };
    push(
        serde_json::to_string(&Header {
            record: "header",
            schema_version: SCHEMA_VERSION,
            controller: record.controller,
            seed: record.seed,
            roll_amplitude_rad: record.roll_amplitude_rad,
            events: &record.events,
        })
        .expect("header serializes"),
    );
    for row in &record.rows {
        push(serde_json::to_string(&Row { record: "row", row }).expect("row serializes"));
    }
    push(
        serde_json::to_string(&Summary { record: "summary", schema_version: SCHEMA_VERSION, summary: &record.summary, failure: &record.failure })
            .expect("summary serializes"),
    );
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Campaign summary CSV, one line per controller.
pub fn campaign_csv(report: &CampaignReport) -> String {
    let mut out = String::from(
        "schema_version,controller,n_trials,successes,success_rate,mean_rms_error_m,median_rms_error_m,mean_position_error_m,\
mean_orientation_error_deg,max_orientation_error_deg,mean_time_to_capture_s,median_time_to_capture_s,solve_time_p50_s,\
solve_time_p95_s,solve_time_max_s,audit_failures,fallback_ticks,failed_trials,efficiency_gain_pct,precision_gain_pct,paired\n",
    );
    for a in &report.controllers {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            report.schema_version,
            a.controller.name(),
            a.n_trials,
            a.successes,
            a.success_rate,
            opt(a.mean_rms_error_m),
            opt(a.median_rms_error_m),
            opt(a.mean_position_error_m),
            opt(a.mean_orientation_error_deg),
            opt(a.max_orientation_error_deg),
            opt(a.mean_time_to_capture_s),
            opt(a.median_time_to_capture_s),
            opt(a.solve_time_p50_s),
            opt(a.solve_time_p95_s),
            opt(a.solve_time_max_s),
            a.audit_failures,
            a.fallback_ticks,
            a.failed_trials,
            opt(a.efficiency_gain_pct),
            opt(a.precision_gain_pct),
            report.paired,
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoverReport {
    pub rms_horizontal_drift_m: f64,
    pub max_horizontal_drift_m: f64,
    pub rms_vertical_drift_m: f64,
}

/// Closed-loop hover at `reference` with Gaussian position-measurement noise
/// fed to the cascaded PD loop.
pub fn run_hover(params: &UavParams, gains: &PdGains, reference: &Vector3<f64>, noise_m: f64, duration_s: f64, seed: u64) -> Result<HoverReport> {
    let mut rng = stream(derive_seed(seed, STREAM_UAV_SENSOR), 0);
    let mut state = UavState::at_rest(*reference);
    let mut memory = PdMemory::default();
    let steps = (duration_s / SIM_STEP_S).round() as usize;
    let (mut h2, mut v2, mut hmax) = (0.0, 0.0, 0.0f64);
    for _ in 0..steps {
        let mut sensed = state;
        sensed.position += gaussian3(&mut rng, noise_m);
        let out = cascaded_pd(&sensed, reference, 0.0, gains, params, &memory, SIM_STEP_S)?;
        memory = out.memory;
        state = integrate_uav(&state, &out.command, params, SIM_STEP_S)?;
        let d = state.position - reference;
        let horizontal = d.x.hypot(d.y);
        h2 += horizontal * horizontal;
        v2 += d.z * d.z;
        hmax = hmax.max(horizontal);
    }
    let n = steps.max(1) as f64;
    Ok(HoverReport { rms_horizontal_drift_m: (h2 / n).sqrt(), max_horizontal_drift_m: hmax, rms_vertical_drift_m: (v2 / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, phase: Phase, error: f64) -> TrialRow {
        let target = Pose6::identity();
        TrialRow {
            t,
            phase,
            target_truth: target,
            target_estimate: target,
            target_prediction: [0.0; 3],
            q: Joints::zeros(),
            q_dot: Joints::zeros(),
            ee_pose: Pose6::from_translation(Vector3::new(error, 0.0, 0.0)),
            relative_speed_m_s: 0.0,
            deck_roll_rad: 0.0,
            deck_pitch_rad: 0.0,
            deck_heave_m: 0.0,
            horizon: 0,
            plan_cost: None,
            plan_passes: 0,
            plan_feasible: None,
            kkt_residual: None,
            audit_ok: None,
            fallback: false,
            solve_time_s: None,
            applied_within_limits: true,
        }
    }

    #[test]
    fn constant_error_gives_that_rms() {
        let rows: Vec<TrialRow> = (0..10).map(|i| row(i as f64 * 0.1, Phase::ApproachAlign, 0.06)).collect();
        let s = compute_metrics(&rows);
        assert!((s.rms_position_error_m.unwrap() - 0.06).abs() < 1e-15);
        assert!(!s.success);
    }

    #[test]
    fn two_row_toy_log() {
        let rows = vec![row(0.0, Phase::Grasp, 0.03), row(0.1, Phase::Retrieve, 0.5), row(0.2, Phase::Done, 0.0)];
        let s = compute_metrics(&rows);
        // window is the single Grasp row
        assert_eq!(s.window_ticks, 1);
        assert!((s.rms_position_error_m.unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(s.time_to_capture_s, Some(0.2));
        assert!(s.success);
        let rows = vec![row(0.0, Phase::ApproachAlign, 0.03), row(0.1, Phase::ApproachAlign, 0.04)];
        let rms = compute_metrics(&rows).rms_position_error_m.unwrap();
        assert!((rms - (0.5f64 * (0.03 * 0.03 + 0.04 * 0.04)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_window_is_not_applicable() {
        let rows = vec![row(0.0, Phase::PoseSync, 0.0), row(0.1, Phase::InterceptPlan, 0.0)];
        let s = compute_metrics(&rows);
        assert!(!s.metrics_applicable);
        assert_eq!(s.rms_position_error_m, None);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), Some(2.0));
        assert_eq!(quantile(&[1.0, 2.0], 0.5), Some(1.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn controller_names_parse() {
        for c in [ControllerKind::SimpleFollowing, ControllerKind::FixedHorizon, ControllerKind::ShrinkingHorizon] {
            assert_eq!(c.name().parse::<ControllerKind>().unwrap(), c);
        }
        assert!("pid".parse::<ControllerKind>().is_err());
    }
}
