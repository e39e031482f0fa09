//! Scenario configuration file.
//!
//! A single JSON document with eight required blocks (`sea_state`, `uav`,
//! `arm`, `eskf`, `controller`, `mission`, `scenario`, `campaign`). Every key
//! inside a block has a default, carries its unit in its name, and unknown
//! keys are rejected. Angles a person is likely to edit are in degrees; the
//! DH table and joint limits stay in radians.
//!
//! The file types are the canonical form: `to_scenario` converts them into
//! the simulator's internal units, so a load/dump/load cycle is exact.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arm::{ArmModel, DOF};
use crate::control::{AccelBound, CostWeights, FollowingGains};
use crate::error::{Error, Result};
use crate::eskf::{InitialUncertainty, MotionKind, TargetMotionModel};
use crate::frames::{EulerAngles, UnitQuaternion};
use crate::harness::{
    home_flange_orientation, CampaignSpec, ControllerKind, ControllerSettings, EskfSettings, MissionSettings, Scenario,
    TargetMotion,
};
use crate::mission::CaptureThresholds;
use crate::uav::{PdGains, UavParams};
use crate::wave::SeaStateConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sea_state: SeaStateBlock,
    pub uav: UavBlock,
    pub arm: ArmModel,
    pub eskf: EskfBlock,
    pub controller: ControllerBlock,
    pub mission: MissionBlock,
    pub scenario: ScenarioBlock,
    pub campaign: CampaignBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeaStateBlock {
    pub roll_amplitude_deg: f64,
    pub pitch_amplitude_deg: f64,
    pub heave_amplitude_m: f64,
    /// Empty draws 1 to 3 components from the trial seed.
    pub component_frequencies_rad_s: Vec<f64>,
    /// Empty draws phases from the trial seed.
    pub phases_deg: Vec<f64>,
}

impl Default for SeaStateBlock {
    fn default() -> Self {
        let s = SeaStateConfig::default();
        Self {
            roll_amplitude_deg: s.roll_amplitude.to_degrees(),
            pitch_amplitude_deg: s.pitch_amplitude.to_degrees(),
            heave_amplitude_m: s.heave_amplitude,
            component_frequencies_rad_s: s.component_frequencies,
            phases_deg: s.phases.iter().map(|p| p.to_degrees()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavBlock {
    pub airframe: UavParams,
    pub gains: UavGainsBlock,
}

impl Default for UavBlock {
    fn default() -> Self {
        Self { airframe: UavParams::default(), gains: UavGainsBlock::from(&PdGains::default()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavGainsBlock {
    pub position_kp_per_s2: [f64; 3],
    pub position_kd_per_s: [f64; 3],
    pub attitude_kp_per_s2: [f64; 3],
    pub attitude_kd_per_s: [f64; 3],
    pub derivative_filter_s: f64,
    pub max_tilt_deg: f64,
}

impl Default for UavGainsBlock {
    fn default() -> Self {
        Self::from(&PdGains::default())
    }
}

impl From<&PdGains> for UavGainsBlock {
    fn from(g: &PdGains) -> Self {
        Self {
            position_kp_per_s2: g.position_kp,
            position_kd_per_s: g.position_kd,
            attitude_kp_per_s2: g.attitude_kp,
            attitude_kd_per_s: g.attitude_kd,
            derivative_filter_s: g.derivative_filter_s,
            max_tilt_deg: g.max_tilt_rad.to_degrees(),
        }
    }
}

impl UavGainsBlock {
    fn to_gains(&self) -> PdGains {
        PdGains {
            position_kp: self.position_kp_per_s2,
            position_kd: self.position_kd_per_s,
            attitude_kp: self.attitude_kp_per_s2,
            attitude_kd: self.attitude_kd_per_s,
            derivative_filter_s: self.derivative_filter_s,
            max_tilt_rad: self.max_tilt_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EskfBlock {
    pub motion_model: MotionKind,
    /// Drives the constant-velocity model.
    pub accel_density_m2_s3: f64,
    /// Drives the constant-acceleration model.
    pub jerk_density_m2_s5: f64,
    pub attitude_density_rad2_s: f64,
    pub initial_position_sigma_m: f64,
    pub initial_velocity_sigma_m_s: f64,
    pub initial_acceleration_sigma_m_s2: f64,
    pub initial_attitude_sigma_deg: f64,
    pub position_sigma_m: f64,
    pub orientation_sigma_deg: f64,
    pub measurement_rate_hz: f64,
    pub measure_orientation: bool,
    pub prediction_lead_s: f64,
}

impl Default for EskfBlock {
    fn default() -> Self {
        let e = EskfSettings::default();
        let mut block = Self {
            motion_model: e.model.kind,
            accel_density_m2_s3: TargetMotionModel::default().process_density,
            jerk_density_m2_s5: 0.0,
            attitude_density_rad2_s: e.model.attitude_density,
            initial_position_sigma_m: e.initial.position_m,
            initial_velocity_sigma_m_s: e.initial.velocity_m_s,
            initial_acceleration_sigma_m_s2: e.initial.acceleration_m_s2,
            initial_attitude_sigma_deg: e.initial.attitude_rad.to_degrees(),
            position_sigma_m: e.position_sigma_m,
            orientation_sigma_deg: e.orientation_sigma_rad.to_degrees(),
            measurement_rate_hz: e.measurement_rate_hz,
            measure_orientation: e.measure_orientation,
            prediction_lead_s: e.prediction_lead_s,
        };
        match e.model.kind {
            MotionKind::ConstantVelocity => block.accel_density_m2_s3 = e.model.process_density,
            MotionKind::ConstantAcceleration => block.jerk_density_m2_s5 = e.model.process_density,
        }
        block
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerBlock {
    pub kind: ControllerKind,
    pub horizon_steps: usize,
    pub min_horizon_steps: usize,
    pub stage_position_weight_per_m2: [f64; 3],
    pub stage_orientation_weight_per_rad2: [f64; 3],
    pub terminal_position_weight_per_m2: [f64; 3],
    pub terminal_orientation_weight_per_rad2: [f64; 3],
    /// Weight on joint accelerations, (rad/s²)⁻².
    pub effort_weight_s4_per_rad2: [f64; DOF],
    pub posture_weight_per_rad2: f64,
    pub severity_gain: f64,
    pub reference_roll_deg: f64,
    pub max_relinearizations: usize,
    pub accel_bound: AccelBound,
    pub following: FollowingGains,
}

fn diag<const N: usize>(m: impl Fn(usize) -> f64) -> [f64; N] {
    std::array::from_fn(m)
}

impl Default for ControllerBlock {
    fn default() -> Self {
        let c = ControllerSettings::default();
        let w = &c.weights;
        Self {
            kind: c.kind,
            horizon_steps: c.horizon_steps,
            min_horizon_steps: c.min_horizon_steps,
            stage_position_weight_per_m2: diag(|i| w.q[(i, i)]),
            stage_orientation_weight_per_rad2: diag(|i| w.q[(i + 3, i + 3)]),
            terminal_position_weight_per_m2: diag(|i| w.q_n[(i, i)]),
            terminal_orientation_weight_per_rad2: diag(|i| w.q_n[(i + 3, i + 3)]),
            effort_weight_s4_per_rad2: diag(|i| w.r[(i, i)]),
            posture_weight_per_rad2: c.posture_weight,
            severity_gain: c.severity_gain,
            reference_roll_deg: c.reference_roll_rad.to_degrees(),
            max_relinearizations: c.max_relinearizations,
            accel_bound: c.accel_bound,
            following: c.following,
        }
    }
}

impl ControllerBlock {
    fn to_settings(&self) -> ControllerSettings {
        let cat = |a: &[f64; 3], b: &[f64; 3]| [a[0], a[1], a[2], b[0], b[1], b[2]];
        ControllerSettings {
            kind: self.kind,
            horizon_steps: self.horizon_steps,
            min_horizon_steps: self.min_horizon_steps,
            weights: CostWeights::diagonal(
                cat(&self.stage_position_weight_per_m2, &self.stage_orientation_weight_per_rad2),
                self.effort_weight_s4_per_rad2,
                cat(&self.terminal_position_weight_per_m2, &self.terminal_orientation_weight_per_rad2),
            ),
            severity_gain: self.severity_gain,
            reference_roll_rad: self.reference_roll_deg.to_radians(),
            max_relinearizations: self.max_relinearizations,
            posture_weight: self.posture_weight_per_rad2,
            accel_bound: self.accel_bound,
            following: self.following,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionBlock {
    pub capture_radius_m: f64,
    pub capture_speed_m_s: f64,
    pub dwell_s: f64,
    pub lock_on_s: f64,
    pub freshness_s: f64,
    pub max_attempts: u32,
    pub retract_depth_m: f64,
    pub holding_depth_m: f64,
}

impl Default for MissionBlock {
    fn default() -> Self {
        let m = MissionSettings::default();
        let t = m.thresholds;
        Self {
            capture_radius_m: t.capture_radius_m,
            capture_speed_m_s: t.capture_speed_m_s,
            dwell_s: t.dwell_s,
            lock_on_s: t.lock_on_s,
            freshness_s: t.freshness_s,
            max_attempts: t.max_attempts,
            retract_depth_m: m.retract_depth_m,
            holding_depth_m: m.holding_depth_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub record_timing: bool,
    pub stop_at_done: bool,
    pub target: TargetMotion,
    /// Z-Y-X grasp-frame attitude; `null` uses the home flange orientation.
    pub target_orientation_rpy_deg: Option<[f64; 3]>,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            duration_s: s.duration_s,
            tick_s: s.tick_s,
            seed: s.seed,
            record_timing: s.record_timing,
            stop_at_done: s.stop_at_done,
            target: s.target,
            target_orientation_rpy_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignBlock {
    pub n_trials: usize,
    pub controllers: Vec<ControllerKind>,
    pub master_seed: u64,
    /// Per-trial roll amplitude drawn uniformly in `[lo, hi]`; `null` keeps
    /// the sea state.
    pub roll_amplitude_range_deg: Option<[f64; 2]>,
    pub target_speeds_m_s: Vec<f64>,
    /// `null` uses every core (or `WAVECATCH_THREADS`).
    pub threads: Option<usize>,
}

impl Default for CampaignBlock {
    fn default() -> Self {
        Self {
            n_trials: 40,
            controllers: vec![ControllerKind::ShrinkingHorizon, ControllerKind::SimpleFollowing],
            master_seed: 1,
            roll_amplitude_range_deg: None,
            target_speeds_m_s: Vec::new(),
            threads: None,
        }
    }
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            sea_state: SeaStateBlock::default(),
            uav: UavBlock::default(),
            arm: ArmModel::default(),
            eskf: EskfBlock::default(),
            controller: ControllerBlock::default(),
            mission: MissionBlock::default(),
            scenario: ScenarioBlock::default(),
            campaign: CampaignBlock::default(),
        }
    }
}

impl ConfigFile {
    /// Parses and validates a config document, naming the offending key path
    /// and line on failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        Self::from_value(value)
    }

    /// Like [`from_json_str`](Self::from_json_str) with `path=value`
    /// overrides applied to the parsed document first.
    pub fn from_json_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let config: ConfigFile = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Config(format!("config: {inner}"))
            } else {
                Error::Config(format!("config key `{path}`: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.to_scenario()?.validate()?;
        let c = &self.campaign;
        if c.n_trials == 0 {
            return Err(Error::Config("campaign.n_trials must be at least 1".into()));
        }
        if c.controllers.is_empty() {
            return Err(Error::Config("campaign.controllers must name at least one controller".into()));
        }
        if let Some([lo, hi]) = c.roll_amplitude_range_deg {
            if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
                return Err(Error::Config("campaign.roll_amplitude_range_deg must satisfy 0 <= lo <= hi".into()));
            }
        }
        if c.target_speeds_m_s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("campaign.target_speeds_m_s must be positive".into()));
        }
        if c.threads == Some(0) {
            return Err(Error::Config("campaign.threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let s = &self.sea_state;
        let sea_state = SeaStateConfig {
            roll_amplitude: s.roll_amplitude_deg.to_radians(),
            pitch_amplitude: s.pitch_amplitude_deg.to_radians(),
            heave_amplitude: s.heave_amplitude_m,
            component_frequencies: s.component_frequencies_rad_s.clone(),
            phases: s.phases_deg.iter().map(|p| p.to_radians()).collect(),
            seed: self.scenario.seed,
        };
        let e = &self.eskf;
        let eskf = EskfSettings {
            model: TargetMotionModel {
                kind: e.motion_model,
                process_density: match e.motion_model {
                    MotionKind::ConstantVelocity => e.accel_density_m2_s3,
                    MotionKind::ConstantAcceleration => e.jerk_density_m2_s5,
                },
                attitude_density: e.attitude_density_rad2_s,
            },
            initial: InitialUncertainty {
                position_m: e.initial_position_sigma_m,
                velocity_m_s: e.initial_velocity_sigma_m_s,
                acceleration_m_s2: e.initial_acceleration_sigma_m_s2,
                attitude_rad: e.initial_attitude_sigma_deg.to_radians(),
            },
            position_sigma_m: e.position_sigma_m,
            orientation_sigma_rad: e.orientation_sigma_deg.to_radians(),
            measurement_rate_hz: e.measurement_rate_hz,
            measure_orientation: e.measure_orientation,
            prediction_lead_s: e.prediction_lead_s,
        };
        let target_orientation = match self.scenario.target_orientation_rpy_deg {
            None => home_flange_orientation(&self.arm),
            Some([r, p, y]) => {
                UnitQuaternion::from_euler(&EulerAngles { roll: r.to_radians(), pitch: p.to_radians(), yaw: y.to_radians() })
            }
        };
        Ok(Scenario {
            sea_state,
            target: self.scenario.target.clone(),
            target_orientation,
            arm: self.arm.clone(),
            uav: self.uav.airframe.clone(),
            uav_gains: self.uav.gains.to_gains(),
            eskf,
            controller: self.controller.to_settings(),
            mission: MissionSettings {
                thresholds: CaptureThresholds {
                    capture_radius_m: self.mission.capture_radius_m,
                    capture_speed_m_s: self.mission.capture_speed_m_s,
                    dwell_s: self.mission.dwell_s,
                    lock_on_s: self.mission.lock_on_s,
                    freshness_s: self.mission.freshness_s,
                    max_attempts: self.mission.max_attempts,
                },
                retract_depth_m: self.mission.retract_depth_m,
                holding_depth_m: self.mission.holding_depth_m,
            },
            duration_s: self.scenario.duration_s,
            tick_s: self.scenario.tick_s,
            seed: self.scenario.seed,
            record_timing: self.scenario.record_timing,
            stop_at_done: self.scenario.stop_at_done,
        })
    }

    pub fn to_campaign(&self) -> Result<CampaignSpec> {
        let c = &self.campaign;
        Ok(CampaignSpec {
            template: self.to_scenario()?,
            n_trials: c.n_trials,
            controllers: c.controllers.clone(),
            master_seed: c.master_seed,
            roll_amplitude_range: c.roll_amplitude_range_deg.map(|[lo, hi]| (lo.to_radians(), hi.to_radians())),
            target_speeds_m_s: c.target_speeds_m_s.clone(),
            threads: c.threads,
        })
    }
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON
/// when it can be and taken as a string otherwise. Naming a block that has a
/// `kind` key with a bare value sets its kind; for `scenario.target` the
/// variant's other keys fall back to their defaults.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));

    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        let here = keys[..depth].join(".");
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{here}` is not a block")))?;
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    match (node.as_object_mut(), &value) {
        (Some(obj), Value::String(_)) if obj.contains_key("kind") => {
            if path == "scenario.target" {
                if obj.get("kind") != Some(&value) {
                    *node = target_defaults(&value)?;
                }
            } else {
                obj.insert("kind".into(), value);
            }
        }
        _ => *node = value,
    }
    Ok(())
}

fn target_defaults(kind: &Value) -> Result<Value> {
    let motion = match kind.as_str().unwrap_or_default() {
        "static" => TargetMotion::Static { position_m: None },
        "circular" => TargetMotion::default_circular(),
        "random" => TargetMotion::default_random(),
        "uav_closed_loop" => TargetMotion::default_uav(),
        other => {
            return Err(Error::Config(format!(
                "unknown target kind `{other}` (expected static, circular, random or uav_closed_loop)"
            )))
        }
    };
    Ok(serde_json::to_value(motion).expect("target serializes"))
}
