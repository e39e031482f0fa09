//! Intercepting a moving target with a manipulator on a wave-disturbed deck.
//!
//! The crate covers the whole loop: deck motion, a quadrotor plant, a 7-DoF
//! arm, an error-state Kalman filter for the target, receding-horizon control
//! on an in-repo QP solver, the capture state machine and a reproducible
//! experiment harness.

pub mod error;
pub mod frames;
pub mod rng;
pub mod wave;
pub mod uav;
pub mod arm;
pub mod eskf;
pub mod qp;
pub mod control;
pub mod mission;
pub mod harness;
pub mod config;
pub mod latency;
pub mod replay;

pub use arm::{ArmModel, DhLink, JointState, Joints, DOF};
pub use config::ConfigFile;
pub use error::{Error, Result};
pub use eskf::{ErrorFilterState, Measurement, MotionKind, TargetMotionModel};
pub use frames::{pose_error, EulerAngles, Pose6, UnitQuaternion};
pub use harness::{
    run_campaign, run_trial, CampaignOutcome, CampaignReport, CampaignSpec, ControllerKind, Scenario, TargetMotion,
    TrialRecord, TrialSummary,
};
pub use mission::{CaptureThresholds, Phase};
pub use uav::{PdGains, UavParams, UavState};
pub use wave::SeaStateConfig;
