//! Offline ESKF replay over a recorded pose trace.
//!
//! Input columns are `t,px,py,pz,qw,qx,qy,qz` (a row may leave all four
//! quaternion cells empty for a position-only fix). Output has the estimate,
//! the estimated velocity, the position predicted `lead_s` ahead and the
//! covariance trace after each update.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eskf::{self, ErrorFilterState, InitialUncertainty, Measurement, NominalState, TargetMotionModel};
use crate::frames::UnitQuaternion;

pub const TRACE_COLUMNS: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub orientation: Option<UnitQuaternion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaySettings {
    pub model: TargetMotionModel,
    pub initial: InitialUncertainty,
    pub position_sigma_m: f64,
    pub orientation_sigma_rad: f64,
    pub lead_s: f64,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        Self {
            model: TargetMotionModel::default(),
            initial: InitialUncertainty::default(),
            position_sigma_m: 0.005,
            orientation_sigma_rad: 0.5f64.to_radians(),
            lead_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRow {
    pub t: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion,
    pub velocity: Vector3<f64>,
    pub predicted_position: Vector3<f64>,
    pub trace_p: f64,
}

fn cell(record: &csv::StringRecord, line: u64, col: usize) -> Result<Option<f64>> {
    let raw = record.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Config(format!("trace line {line}: column `{}` has non-numeric value `{raw}`", TRACE_COLUMNS[col]))),
    }
}

/// Parses a trace, checking the header, every cell and stamp monotonicity.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceSample>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Config(format!("trace header: {e}")))?.clone();
    for (i, want) in TRACE_COLUMNS.iter().enumerate() {
        match header.get(i).map(str::trim) {
            Some(got) if got == *want => {}
            Some(got) => return Err(Error::Config(format!("trace column {} is `{got}`, expected `{want}`", i + 1))),
            None => return Err(Error::Config(format!("trace is missing column `{want}`"))),
        }
    }
    if let Some(extra) = header.get(TRACE_COLUMNS.len()) {
        return Err(Error::Config(format!("trace has unexpected column `{}`", extra.trim())));
    }

    let mut samples: Vec<TraceSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("trace: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRACE_COLUMNS.len() {
            return Err(Error::Config(format!("trace line {line}: expected 8 columns, found {}", record.len())));
        }
        let mut v = [None; 8];
        for (col, slot) in v.iter_mut().enumerate() {
            *slot = cell(&record, line, col)?;
        }
        let need = |col: usize| v[col].ok_or_else(|| Error::Config(format!("trace line {line}: column `{}` is empty", TRACE_COLUMNS[col])));
        let t = need(0)?;
        let position = Vector3::new(need(1)?, need(2)?, need(3)?);
        let orientation = match v[4..] {
            [None, None, None, None] => None,
            [Some(w), Some(x), Some(y), Some(z)] => Some(
                UnitQuaternion::new_normalize(w, x, y, z)
                    .map_err(|_| Error::Config(format!("trace line {line}: column `qw` starts a zero quaternion")))?,
            ),
            _ => {
                let col = (4..8).find(|&c| v[c].is_none()).expect("one quaternion cell is empty");
                return Err(Error::Config(format!("trace line {line}: column `{}` is empty", TRACE_COLUMNS[col])));
            }
        };
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(Error::Config(format!("trace line {line}: column `t` is not increasing ({t} after {})", prev.t)));
            }
        }
        samples.push(TraceSample { t, position, orientation });
    }
    if samples.is_empty() {
        return Err(Error::Config("trace has no samples".into()));
    }
    Ok(samples)
}

/// Runs the filter over `samples`, initialised at rest on the first fix.
pub fn replay(samples: &[TraceSample], settings: &ReplaySettings) -> Result<Vec<ReplayRow>> {
    let first = samples.first().ok_or_else(|| Error::Config("trace has no samples".into()))?;
    let nominal = NominalState {
        position: first.position,
        velocity: Vector3::zeros(),
        acceleration: Vector3::zeros(),
        orientation: first.orientation.unwrap_or_else(UnitQuaternion::identity),
        stamp: first.t,
    };
    let mut state = ErrorFilterState::new(
        settings.model,
        nominal,
        &settings.initial,
        settings.position_sigma_m,
        settings.orientation_sigma_rad,
    )?;
    let mut rows = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let z = Measurement { position: s.position, orientation: s.orientation, stamp: s.t, r_override: None };
            state = eskf::update(&state, &z)?.state;
        }
        let ahead = eskf::extrapolate(&state, settings.lead_s, 1)?;
        rows.push(ReplayRow {
            t: s.t,
            position: state.nominal.position,
            orientation: state.nominal.orientation,
            velocity: state.nominal.velocity,
            predicted_position: ahead.last_pose().position,
            trace_p: state.trace(),
        });
    }
    Ok(rows)
}

pub fn replay_csv(rows: &[ReplayRow]) -> String {
    let mut out = String::from(
        "t,est_px,est_py,est_pz,est_qw,est_qx,est_qy,est_qz,est_vx,est_vy,est_vz,pred05_px,pred05_py,pred05_pz,trace_P\n",
    );
    for r in rows {
        let (p, q, v, f) = (r.position, r.orientation, r.velocity, r.predicted_position);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t, p.x, p.y, p.z, q.w, q.x, q.y, q.z, v.x, v.y, v.z, f.x, f.y, f.z, r.trace_p
        ));
    }
    out
}
