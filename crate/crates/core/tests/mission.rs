use nalgebra::Vector3;
use proptest::prelude::*;

use wavecatch::mission::{audit_phase_log, capture_tick, delivery_decide, verdict, CaptureObservation, CaptureState, ReachProbe, Verdict};
use wavecatch::{ArmModel, CaptureThresholds, Phase, Pose6};

#[derive(Debug, Clone)]
struct Tick {
    error_m: f64,
    speed: f64,
    feasible: bool,
    retracted: bool,
    stale: bool,
}

fn tick() -> impl Strategy<Value = Tick> {
    (0.0..0.1f64, 0.0..0.4f64, any::<bool>(), any::<bool>(), proptest::bool::weighted(0.02)).prop_map(
        |(error_m, speed, feasible, retracted, stale)| Tick { error_m, speed, feasible, retracted, stale },
    )
}

fn observe(t: f64, tick: &Tick) -> CaptureObservation {
    let target = Pose6::from_translation(Vector3::new(0.5, 0.0, 0.6));
    CaptureObservation {
        t,
        ee_pose: Pose6::from_translation(target.position + Vector3::new(tick.error_m, 0.0, 0.0)),
        ee_stamp: t,
        target_pose: target,
        target_stamp: if tick.stale { t - 1.0 } else { t },
        relative_speed: tick.speed,
        plan_feasible: tick.feasible,
        retracted: tick.retracted,
    }
}

fn run(ticks: &[Tick]) -> (CaptureState, Vec<wavecatch::mission::PhaseEvent>) {
    let thresholds = CaptureThresholds::default();
    let mut state = CaptureState::new(0.0);
    let mut events = Vec::new();
    for (k, tk) in ticks.iter().enumerate() {
        let out = capture_tick(&state, &observe(k as f64 * 0.025, tk), &thresholds);
        events.extend(out.event);
        state = out.state;
    }
    (state, events)
}

proptest! {
    #[test]
    fn every_logged_transition_is_an_edge(ticks in proptest::collection::vec(tick(), 1..400)) {
        let (state, events) = run(&ticks);
        prop_assert!(audit_phase_log(&events).is_ok());
        prop_assert_eq!(events.last().map_or(Phase::PoseSync, |e| e.to), state.phase);
    }

    #[test]
    fn terminal_phases_absorb(ticks in proptest::collection::vec(tick(), 1..200)) {
        let thresholds = CaptureThresholds::default();
        for phase in [Phase::Done, Phase::Aborted] {
            let mut state = CaptureState { phase, ..CaptureState::new(0.0) };
            for (k, tk) in ticks.iter().enumerate() {
                let out = capture_tick(&state, &observe(k as f64 * 0.025, tk), &thresholds);
                prop_assert!(out.event.is_none());
                state = out.state;
            }
            prop_assert_eq!(state.phase, phase);
        }
    }

    #[test]
    fn verdict_is_a_pure_table(ready in any::<bool>(), reachable in any::<bool>(), deadline in any::<bool>()) {
        let v = verdict(ready, reachable, deadline);
        prop_assert_eq!(v, verdict(ready, reachable, deadline));
        prop_assert_eq!(v == Verdict::Proceed, ready && reachable && deadline);
        prop_assert_eq!(v == Verdict::Wait, !ready && reachable && deadline);
    }
}

#[test]
fn clean_approach_reaches_done() {
    let hold = Tick { error_m: 0.01, speed: 0.05, feasible: true, retracted: false, stale: false };
    let mut ticks = vec![hold.clone(); 60];
    ticks.extend(vec![Tick { retracted: true, ..hold }; 5]);
    let (state, events) = run(&ticks);
    assert_eq!(state.phase, Phase::Done);
    let path: Vec<Phase> = events.iter().map(|e| e.to).collect();
    assert_eq!(path, [Phase::InterceptPlan, Phase::ApproachAlign, Phase::Grasp, Phase::Retrieve, Phase::Done]);
}

#[test]
fn delivery_decisions() {
    let model = ArmModel::default();
    let probe = ReachProbe::default();
    let near = Pose6::from_translation(Vector3::new(0.5, 0.0, 0.6));
    let far = Pose6::from_translation(Vector3::new(3.0, 0.0, 0.6));
    assert_eq!(delivery_decide(true, &near, &model, 10.0, 2.0, &probe).verdict, Verdict::Proceed);
    assert_eq!(delivery_decide(false, &near, &model, 10.0, 2.0, &probe).verdict, Verdict::Wait);
    assert_eq!(delivery_decide(true, &near, &model, 1.0, 2.0, &probe).verdict, Verdict::Abort);
    let d = delivery_decide(false, &far, &model, 10.0, 2.0, &probe);
    assert!(!d.target_reachable);
    assert_eq!(d.verdict, Verdict::Abort);
}
