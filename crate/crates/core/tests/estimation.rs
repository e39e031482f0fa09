use nalgebra::Vector3;
use proptest::prelude::*;

use wavecatch::eskf::{extrapolate, predict, update, InitialUncertainty, MotionKind, NominalState};
use wavecatch::replay::{parse_trace_csv, replay, replay_csv, ReplaySettings};
use wavecatch::{Error, ErrorFilterState, Measurement, TargetMotionModel, UnitQuaternion};

fn filter(kind: MotionKind) -> ErrorFilterState {
    let model = TargetMotionModel { kind, ..TargetMotionModel::default() };
    let nominal = NominalState {
        position: Vector3::new(0.5, 0.0, 0.6),
        velocity: Vector3::zeros(),
        acceleration: Vector3::zeros(),
        orientation: UnitQuaternion::identity(),
        stamp: 0.0,
    };
    ErrorFilterState::new(model, nominal, &InitialUncertainty::default(), 0.005, 0.01).unwrap()
}

#[test]
fn tracks_a_constant_velocity_target() {
    let v = Vector3::new(0.3, -0.2, 0.1);
    let mut f = filter(MotionKind::ConstantVelocity);
    for k in 1..=300 {
        let t = k as f64 * 0.01;
        f = update(&f, &Measurement::position(Vector3::new(0.5, 0.0, 0.6) + v * t, t)).unwrap().state;
    }
    assert!((f.nominal.velocity - v).norm() < 1e-3);
    let ahead = extrapolate(&f, 0.5, 10).unwrap();
    let truth = Vector3::new(0.5, 0.0, 0.6) + v * 3.5;
    assert!((ahead.last_pose().position - truth).norm() < 1e-3);
    assert_eq!(ahead.poses.len(), 11);
}

#[test]
fn constant_acceleration_model_follows_a_parabola() {
    let a = Vector3::new(0.0, 0.0, -1.0);
    let mut f = filter(MotionKind::ConstantAcceleration);
    for k in 1..=300 {
        let t = k as f64 * 0.01;
        f = update(&f, &Measurement::position(Vector3::new(0.5, 0.0, 0.6) + a * (0.5 * t * t), t)).unwrap().state;
    }
    assert_eq!(f.dim(), 12);
    assert!((f.nominal.acceleration - a).norm() < 0.05);
}

#[test]
fn stale_and_invalid_inputs_are_rejected() {
    let f = predict(&filter(MotionKind::ConstantVelocity), 0.1).unwrap();
    let stale = update(&f, &Measurement::position(Vector3::zeros(), 0.05)).unwrap_err();
    assert!(matches!(stale, Error::StaleMeasurement { .. }));
    let nan = update(&f, &Measurement::position(Vector3::new(f64::NAN, 0.0, 0.0), 0.2)).unwrap_err();
    assert!(matches!(nan, Error::NumericInput(_)));
    assert!(predict(&f, 0.0).is_err());
    assert!(extrapolate(&f, 0.0, 5).is_err());
    assert!(extrapolate(&f, 2.5, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn update_never_inflates_position_uncertainty(
        dx in -0.1..0.1f64, dy in -0.1..0.1f64, dz in -0.1..0.1f64,
        dt in 0.001..0.1f64, with_attitude in any::<bool>(),
    ) {
        let prior = predict(&filter(MotionKind::ConstantVelocity), dt).unwrap();
        let mut z = Measurement::position(prior.nominal.position + Vector3::new(dx, dy, dz), prior.nominal.stamp);
        if with_attitude {
            z.orientation = Some(UnitQuaternion::exp(&Vector3::new(dz, dx, dy)));
        }
        let post = update(&prior, &z).unwrap().state;
        let shrink = prior.position_covariance() - post.position_covariance();
        prop_assert!(shrink.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn prediction_is_additive_in_time(a in 0.001..0.2f64, b in 0.001..0.2f64) {
        let f = filter(MotionKind::ConstantAcceleration);
        let two = predict(&predict(&f, a).unwrap(), b).unwrap();
        let one = predict(&f, a + b).unwrap();
        prop_assert!((two.covariance - one.covariance).amax() < 1e-12);
        prop_assert!((two.nominal.position - one.nominal.position).norm() < 1e-12);
    }
}

const TRACE: &str = "t,px,py,pz,qw,qx,qy,qz\n0.00,0.5,0.0,0.6,1,0,0,0\n0.01,0.501,0.0,0.6,,,,\n0.02,0.502,0.0,0.6,1,0,0,0\n";

#[test]
fn trace_replay_produces_one_row_per_sample() {
    let samples = parse_trace_csv(TRACE).unwrap();
    assert_eq!(samples.len(), 3);
    assert!(samples[1].orientation.is_none());
    let rows = replay(&samples, &ReplaySettings::default()).unwrap();
    assert_eq!(rows.len(), 3);
    let csv = replay_csv(&rows);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("t,est_px"));
}

#[test]
fn malformed_traces_name_the_problem() {
    let err = parse_trace_csv("t,px,py,pz,qw,qx,qy,qz\n0.1,0,0,0,,,,\n0.05,0,0,0,,,,\n").unwrap_err();
    assert!(err.to_string().contains("not increasing"), "{err}");
    let err = parse_trace_csv("t,px,py,qz\n").unwrap_err();
    assert!(err.to_string().contains("expected `pz`"), "{err}");
    let err = parse_trace_csv("t,px,py,pz,qw,qx,qy,qz\n0.1,0,abc,0,,,,\n").unwrap_err();
    assert!(err.to_string().contains("`py`"), "{err}");
    assert!(parse_trace_csv("t,px,py,pz,qw,qx,qy,qz\n").is_err());
}
