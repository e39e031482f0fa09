//! Wave-induced deck motion: roll, pitch and heave as sums of sinusoids.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Pose6, UnitQuaternion};
use crate::rng::unit_from;
use nalgebra::Vector3;

/// Largest accepted roll or pitch amplitude (about 20°).
pub const MAX_TILT_AMPLITUDE: f64 = 0.35;

const AXES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaStateConfig {
    #[serde(rename = "roll_amplitude_rad")]
    pub roll_amplitude: f64,
    #[serde(rename = "pitch_amplitude_rad")]
    pub pitch_amplitude: f64,
    #[serde(rename = "heave_amplitude_m")]
    pub heave_amplitude: f64,
    /// 1-3 component frequencies; empty means "draw 1-3 from the seed".
    #[serde(rename = "component_frequencies_rad_s", default)]
    pub component_frequencies: Vec<f64>,
    /// Roll phases per component; empty means "draw from the seed".
    #[serde(rename = "phases_rad", default)]
    pub phases: Vec<f64>,
    pub seed: u64,
}

impl Default for SeaStateConfig {
    fn default() -> Self {
        Self {
            roll_amplitude: 5f64.to_radians(),
            pitch_amplitude: 2f64.to_radians(),
            heave_amplitude: 0.02,
            component_frequencies: Vec::new(),
            phases: Vec::new(),
            seed: 1,
        }
    }
}

impl SeaStateConfig {
    pub fn calm() -> Self {
        Self { roll_amplitude: 0.0, pitch_amplitude: 0.0, heave_amplitude: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let amps = [self.roll_amplitude, self.pitch_amplitude, self.heave_amplitude];
        if amps.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config("sea_state amplitudes must be finite and >= 0".into()));
        }
        if self.roll_amplitude > MAX_TILT_AMPLITUDE || self.pitch_amplitude > MAX_TILT_AMPLITUDE {
            return Err(Error::Config(format!(
                "sea_state tilt amplitude exceeds {MAX_TILT_AMPLITUDE} rad"
            )));
        }
        if self.component_frequencies.len() > 3 {
            return Err(Error::Config("sea_state accepts at most 3 frequency components".into()));
        }
        if self.component_frequencies.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Config("sea_state frequencies must be strictly positive".into()));
        }
        if !self.phases.is_empty() && !self.component_frequencies.is_empty()
            && self.phases.len() != self.component_frequencies.len()
        {
            return Err(Error::Config("sea_state phases must match the frequency list".into()));
        }
        Ok(())
    }

    /// Expands the configuration into explicit per-axis sinusoid components.
    pub fn resolve(&self) -> WaveModel {
        let seed = self.seed;
        let freqs: Vec<f64> = if self.component_frequencies.is_empty() {
            let n = 1 + (unit_from(seed, 0) * 3.0) as usize;
            (0..n).map(|i| 0.5 + unit_from(seed, 1 + i as u64)).collect()
        } else {
            self.component_frequencies.clone()
        };
        let n = freqs.len();
        let amplitudes = [self.roll_amplitude, self.pitch_amplitude, self.heave_amplitude];
        let mut axes: [Vec<WaveComponent>; AXES] = Default::default();
        for (axis, comps) in axes.iter_mut().enumerate() {
            for (i, &frequency) in freqs.iter().enumerate() {
                let base_phase = if self.phases.len() == n {
                    self.phases[i]
                } else {
                    TAU * unit_from(seed, 16 + i as u64)
                };
                // roll uses the base phase, pitch and heave are offset deterministically
                let offset = if axis == 0 { 0.0 } else { TAU * unit_from(seed, 32 + (axis * 4 + i) as u64) };
                comps.push(WaveComponent {
                    amplitude: amplitudes[axis] / n as f64,
                    frequency,
                    phase: base_phase + offset,
                });
            }
        }
        let [roll, pitch, heave] = axes;
        WaveModel { roll, pitch, heave }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveComponent {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveModel {
    pub roll: Vec<WaveComponent>,
    pub pitch: Vec<WaveComponent>,
    pub heave: Vec<WaveComponent>,
}

fn eval(components: &[WaveComponent], t: f64) -> (f64, f64) {
    components.iter().fold((0.0, 0.0), |(v, dv), c| {
        let arg = c.frequency * t + c.phase;
        (v + c.amplitude * arg.sin(), dv + c.amplitude * c.frequency * arg.cos())
    })
}

impl WaveModel {
    pub fn pose_at(&self, t: f64) -> BasePose {
        let (roll, roll_rate) = eval(&self.roll, t);
        let (pitch, pitch_rate) = eval(&self.pitch, t);
        let (heave, heave_rate) = eval(&self.heave, t);
        BasePose { time: t, roll, pitch, heave, roll_rate, pitch_rate, heave_rate }
    }
}

/// Deck attitude and heave with their exact time derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub time: f64,
    pub roll: f64,
    pub pitch: f64,
    pub heave: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub heave_rate: f64,
}

impl BasePose {
    /// Constant-rate forecast `lead` seconds ahead.
    pub fn extrapolate(&self, lead: f64) -> BasePose {
        BasePose {
            time: self.time + lead,
            roll: self.roll + self.roll_rate * lead,
            pitch: self.pitch + self.pitch_rate * lead,
            heave: self.heave + self.heave_rate * lead,
            ..*self
        }
    }
}

pub fn base_pose_at(config: &SeaStateConfig, t: f64) -> BasePose {
    config.resolve().pose_at(t)
}

/// Deck frame relative to the inertial frame.
pub fn base_transform(pose: &BasePose) -> Pose6 {
    let q = UnitQuaternion::from_euler(&EulerAngles::new(pose.roll, pose.pitch, 0.0));
    Pose6::new(Vector3::new(0.0, 0.0, pose.heave), q)
}
