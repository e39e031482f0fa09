//! Capture workflow state machine and the cargo-delivery decision.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::arm::{forward_kinematics, ArmModel, JointState};
use crate::control::{solve_horizon, CostWeights, PlannerSettings};
use crate::frames::Pose6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PoseSync,
    InterceptPlan,
    ApproachAlign,
    Grasp,
    Retrieve,
    Done,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }

    fn next(self) -> Option<Phase> {
        match self {
            Phase::PoseSync => Some(Phase::InterceptPlan),
            Phase::InterceptPlan => Some(Phase::ApproachAlign),
            Phase::ApproachAlign => Some(Phase::Grasp),
            Phase::Grasp => Some(Phase::Retrieve),
            Phase::Retrieve => Some(Phase::Done),
            Phase::Done | Phase::Aborted => None,
        }
    }

    /// Edges of the workflow graph: one step forward, any live phase to
    /// `Aborted`, and `Grasp → InterceptPlan` on a miss.
    pub fn can_transition(self, to: Phase) -> bool {
        if self.is_terminal() {
            return false;
        }
        to == Phase::Aborted || self.next() == Some(to) || (self == Phase::Grasp && to == Phase::InterceptPlan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureThresholds {
    pub capture_radius_m: f64,
    pub capture_speed_m_s: f64,
    pub dwell_s: f64,
    /// How long the position gate must hold without a break before the gripper may close.
    pub lock_on_s: f64,
    /// A pose stream older than this is stale.
    pub freshness_s: f64,
    /// Misses allowed before the attempt is aborted.
    pub max_attempts: u32,
}

impl Default for CaptureThresholds {
    fn default() -> Self {
        Self { capture_radius_m: 0.05, capture_speed_m_s: 0.2, dwell_s: 0.2, lock_on_s: 0.5, freshness_s: 0.1, max_attempts: 20 }
    }
}

impl CaptureThresholds {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [self.capture_radius_m, self.capture_speed_m_s, self.freshness_s];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || [self.dwell_s, self.lock_on_s].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(crate::Error::Config("mission thresholds must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvent {
    pub t: f64,
    pub from: Phase,
    pub to: Phase,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureState {
    pub phase: Phase,
    pub entered_at: f64,
    pub attempts: u32,
    pub last_t: f64,
    /// Start of the current unbroken run inside the capture radius.
    #[serde(default)]
    pub locked_since: Option<f64>,
}

impl CaptureState {
    pub fn new(t: f64) -> Self {
        Self { phase: Phase::PoseSync, entered_at: t, attempts: 0, last_t: t, locked_since: None }
    }
}

/// What the state machine sees on one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureObservation {
    pub t: f64,
    pub ee_pose: Pose6,
    pub ee_stamp: f64,
    /// Estimated target (UAV or cargo) pose.
    pub target_pose: Pose6,
    pub target_stamp: f64,
    /// `‖v_ee − v_target‖`, m/s.
    pub relative_speed: f64,
    pub plan_feasible: bool,
    /// End effector is inside the holding region.
    pub retracted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavCommand {
    ReduceLateralVelocity,
    Disarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureTick {
    pub state: CaptureState,
    pub uav_commands: Vec<UavCommand>,
    pub gripper: Option<GripperCommand>,
    pub event: Option<PhaseEvent>,
}

fn enter(state: &CaptureState, to: Phase, t: f64, cause: &str) -> (CaptureState, PhaseEvent) {
    debug_assert!(state.phase.can_transition(to));
    let event = PhaseEvent { t, from: state.phase, to, cause: cause.to_string() };
    (CaptureState { phase: to, entered_at: t, attempts: state.attempts, last_t: t, locked_since: None }, event)
}

/// Advances the capture workflow by one tick.
pub fn capture_tick(state: &CaptureState, obs: &CaptureObservation, thresholds: &CaptureThresholds) -> CaptureTick {
    let t = obs.t.max(state.last_t);
    let mut out = CaptureTick {
        state: CaptureState { last_t: t, ..state.clone() },
        uav_commands: Vec::new(),
        gripper: None,
        event: None,
    };
    if state.phase.is_terminal() {
        return out;
    }

    let ee_fresh = t - obs.ee_stamp < thresholds.freshness_s;
    let target_fresh = t - obs.target_stamp < thresholds.freshness_s;
    let error = (obs.ee_pose.position - obs.target_pose.position).norm();
    let within = error <= thresholds.capture_radius_m;
    let locked_since = match (state.phase, within) {
        (Phase::ApproachAlign, true) => Some(state.locked_since.unwrap_or(t)),
        _ => None,
    };
    out.state.locked_since = locked_since;

    let transition = match state.phase {
        _ if state.phase != Phase::PoseSync && !(ee_fresh && target_fresh) => {
            let which = if ee_fresh { "target" } else { "end-effector" };
            Some((Phase::Aborted, format!("stale {which} pose stream")))
        }
        Phase::PoseSync if ee_fresh && target_fresh => Some((Phase::InterceptPlan, "pose streams synchronized".into())),
        Phase::InterceptPlan if obs.plan_feasible => Some((Phase::ApproachAlign, "feasible intercept plan".into())),
        Phase::ApproachAlign
            if locked_since.is_some_and(|since| t - since >= thresholds.lock_on_s - 1e-9)
                && obs.relative_speed <= thresholds.capture_speed_m_s =>
        {
            Some((Phase::Grasp, format!("proximity: error {error:.4} m, relative speed {:.4} m/s", obs.relative_speed)))
        }
        Phase::Grasp if !within => {
            if state.attempts + 1 >= thresholds.max_attempts {
                Some((Phase::Aborted, format!("miss {} of {}", state.attempts + 1, thresholds.max_attempts)))
            } else {
                Some((Phase::InterceptPlan, format!("miss: error {error:.4} m during dwell")))
            }
        }
        Phase::Grasp if t - state.entered_at >= thresholds.dwell_s - 1e-9 => Some((Phase::Retrieve, "gripper latched".into())),
        Phase::Retrieve if obs.retracted => Some((Phase::Done, "retracted into holding region".into())),
        _ => None,
    };

    if let Some((to, cause)) = transition {
        let (mut next, event) = enter(&out.state, to, t, &cause);
        if state.phase == Phase::Grasp && to != Phase::Retrieve {
            next.attempts += 1;
            out.gripper = Some(GripperCommand::Open);
        }
        match to {
            Phase::Grasp => out.gripper = Some(GripperCommand::Close),
            Phase::Done => out.uav_commands.push(UavCommand::Disarm),
            _ => {}
        }
        out.state = next;
        out.event = Some(event);
    }
    if out.state.phase == Phase::ApproachAlign {
        out.uav_commands.push(UavCommand::ReduceLateralVelocity);
    }
    out
}

/// Checks a recorded event sequence against the workflow graph, starting from
/// `PoseSync`, with non-decreasing times.
pub fn audit_phase_log(events: &[PhaseEvent]) -> Result<(), String> {
    let mut phase = Phase::PoseSync;
    let mut t = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        if e.from != phase {
            return Err(format!("event {i} leaves {:?} but the machine is in {:?}", e.from, phase));
        }
        if !e.from.can_transition(e.to) {
            return Err(format!("event {i}: {:?} -> {:?} is not an edge", e.from, e.to));
        }
        if e.t < t {
            return Err(format!("event {i} goes back in time"));
        }
        phase = e.to;
        t = e.t;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proceed,
    Wait,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryDecision {
    pub cargo_ready: bool,
    pub target_reachable: bool,
    pub within_deadline: bool,
    pub verdict: Verdict,
}

/// Verdict table. An unreachable target aborts regardless of the other
/// predicates; otherwise unready cargo waits while the deadline holds.
pub fn verdict(cargo_ready: bool, target_reachable: bool, within_deadline: bool) -> Verdict {
    match (cargo_ready, target_reachable, within_deadline) {
        (true, true, true) => Verdict::Proceed,
        (false, true, true) => Verdict::Wait,
        _ => Verdict::Abort,
    }
}

/// Settings of the reachability probe used by [`delivery_decide`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReachProbe {
    pub weights: CostWeights,
    pub settings: PlannerSettings,
    pub horizon: usize,
    /// Terminal position error accepted as "reached", m.
    pub tolerance_m: f64,
}

impl Default for ReachProbe {
    fn default() -> Self {
        let mut q = [400.0; 6];
        q[3..].fill(0.0);
        let mut q_n = [4000.0; 6];
        q_n[3..].fill(0.0);
        Self {
            weights: CostWeights::diagonal(q, [1e-2; 7], q_n),
            settings: PlannerSettings { dt: 0.05, ..PlannerSettings::default() },
            horizon: 20,
            tolerance_m: 0.05,
        }
    }
}

/// Position reachability: inside the workspace box and reached by an
/// `h`-step probe solve from the home pose at rest. `target` is in the deck frame.
pub fn target_reachable(target: &Pose6, model: &ArmModel, probe: &ReachProbe) -> bool {
    if !model.workspace_contains(&target.position) {
        return false;
    }
    let z0 = JointState::at_rest(model.home());
    let base = vec![Pose6::identity(); probe.horizon + 1];
    let traj = vec![*target; probe.horizon + 1];
    match solve_horizon(&z0, &traj, &base, model, &probe.weights, probe.horizon, None, &probe.settings) {
        Ok(plan) => {
            let reached: Vector3<f64> = forward_kinematics(model, &plan.states[probe.horizon - 1].q, &Pose6::identity()).position;
            plan.feasible && (reached - target.position).norm() <= probe.tolerance_m
        }
        Err(_) => false,
    }
}

pub fn delivery_decide(
    cargo_ready: bool,
    target: &Pose6,
    model: &ArmModel,
    deadline_remaining: f64,
    estimated_completion: f64,
    probe: &ReachProbe,
) -> DeliveryDecision {
    let target_reachable = target_reachable(target, model, probe);
    let within_deadline = deadline_remaining >= 0.0 && estimated_completion <= deadline_remaining;
    DeliveryDecision { cargo_ready, target_reachable, within_deadline, verdict: verdict(cargo_ready, target_reachable, within_deadline) }
}
