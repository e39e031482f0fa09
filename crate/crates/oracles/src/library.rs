//! Evaluates oracle inputs through `wavecatch`, producing JSON shaped like
//! the expected values.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use serde_json::{json, Value};

use wavecatch::arm::{build_discrete_model, check_limits, end_effector_twist, forward_kinematics, geometric_jacobian};
use wavecatch::control::{
    evaluate_cost, fixed_horizon_step, shrinking_horizon_step, simple_following_step, solve_horizon, CostWeights,
    FollowingGains, HorizonPlan, PlanStatus, PlannerSettings, RhcState,
};
use wavecatch::eskf::{self, InitialUncertainty, NominalState};
use wavecatch::harness::{compute_metrics, ControllerSettings, TrialRow};
use wavecatch::latency::bench_instance;
use wavecatch::mission::{capture_tick, delivery_decide, CaptureObservation, CaptureState, ReachProbe};
use wavecatch::qp::{solve_qp, QpProblem, QpSettings};
use wavecatch::replay::{replay, ReplaySettings, TraceSample};
use wavecatch::uav::{cascaded_pd, integrate_uav, uav_derivative, PdMemory, RotorCommand};
use wavecatch::wave::{base_transform, BasePose};
use wavecatch::{
    pose_error, ArmModel, ErrorFilterState, EulerAngles, JointState, Joints, MotionKind, PdGains, Pose6,
    TargetMotionModel, UavParams, UavState, UnitQuaternion,
};

use crate::naive::Lcg;
use crate::OracleCase;

type Out = Result<Value, String>;

fn f(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("input `{key}` is not a number"))
}

fn u(v: &Value, key: &str) -> Result<usize, String> {
    v[key].as_u64().map(|x| x as usize).ok_or_else(|| format!("input `{key}` is not an integer"))
}

fn floats(v: &Value) -> Result<Vec<f64>, String> {
    v.as_array()
        .ok_or_else(|| format!("expected an array, got {v}"))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| format!("non-numeric entry {x}")))
        .collect()
}

fn vec3(v: &Value) -> Result<Vector3<f64>, String> {
    let x = floats(v)?;
    (x.len() == 3).then(|| Vector3::new(x[0], x[1], x[2])).ok_or_else(|| "expected 3 numbers".into())
}

fn joints(v: &Value) -> Result<Joints, String> {
    let x = floats(v)?;
    (x.len() == 7).then(|| Joints::from_column_slice(&x)).ok_or_else(|| "expected 7 numbers".into())
}

fn quat(v: &Value) -> Result<UnitQuaternion, String> {
    let x = floats(v)?;
    if x.len() != 4 {
        return Err("expected 4 quaternion components".into());
    }
    UnitQuaternion::new_normalize(x[0], x[1], x[2], x[3]).map_err(|e| e.to_string())
}

fn pose(v: &Value) -> Result<Pose6, String> {
    Ok(Pose6::new(vec3(&v["position"])?, quat(&v["orientation"])?))
}

fn v3j(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

fn m3j(m: &Matrix3<f64>) -> Value {
    json!((0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn dmj(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn qj(q: &UnitQuaternion) -> Value {
    json!([q.w, q.x, q.y, q.z])
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn uav_state(v: &Value) -> Result<UavState, String> {
    Ok(UavState {
        position: vec3(&v["position"])?,
        velocity: vec3(&v["velocity"])?,
        orientation: quat(&v["orientation"])?,
        body_rates: vec3(&v["body_rates"])?,
    })
}

fn uav_state_json(s: &UavState) -> Value {
    json!({
        "position": v3j(&s.position),
        "velocity": v3j(&s.velocity),
        "orientation": qj(&s.orientation),
        "body_rates": v3j(&s.body_rates),
    })
}

fn thrusts(v: &Value) -> Result<RotorCommand, String> {
    let x = floats(v)?;
    (x.len() == 4).then(|| RotorCommand([x[0], x[1], x[2], x[3]])).ok_or_else(|| "expected 4 thrusts".into())
}

fn weights6(v: &Value) -> Result<[f64; 6], String> {
    floats(v)?.try_into().map_err(|_| "expected 6 weights".to_string())
}

/// Runs one case through the library.
pub fn evaluate(case: &OracleCase) -> Out {
    let i = &case.inputs;
    match case.name.as_str() {
        "frames_euler_to_rotation" => {
            let e = EulerAngles::new(f(i, "roll")?, f(i, "pitch")?, f(i, "yaw")?);
            let r = wavecatch::frames::euler_to_rotation(&e).map_err(err)?;
            let back = wavecatch::frames::rotation_to_euler(&r);
            Ok(json!({ "rotation": m3j(&r), "round_trip": [back.roll, back.pitch, back.yaw] }))
        }
        "frames_rotation_preserves_norm" => {
            let mut rng = Lcg::new(i["seed"].as_u64().unwrap_or(0));
            let mut worst: f64 = 0.0;
            for _ in 0..u(i, "samples")? {
                let mut d = || rng.symmetric(1.0);
                let q = UnitQuaternion::new_normalize(d(), d(), d(), d()).map_err(err)?;
                let v = Vector3::new(d(), d(), d()) * 10.0;
                worst = worst.max((q.rotate(&v).norm() - v.norm()).abs());
                worst = worst.max((q.to_rotation() * v).norm() - v.norm());
            }
            Ok(json!({ "max_norm_deviation": worst }))
        }
        "frames_pose_error_about_z" => {
            let e = pose_error(&pose(&i["actual"])?, &pose(&i["target"])?);
            Ok(json!({ "error": e.as_slice() }))
        }
        "wave_roll_two_components" => {
            let cfg = wavecatch::SeaStateConfig {
                roll_amplitude: f(i, "roll_amplitude_rad")?,
                pitch_amplitude: 0.0,
                heave_amplitude: 0.0,
                component_frequencies: floats(&i["frequencies"])?,
                phases: floats(&i["phases"])?,
                seed: 1,
            };
            cfg.validate().map_err(err)?;
            let p = cfg.resolve().pose_at(f(i, "t")?);
            Ok(json!({ "roll": p.roll, "roll_rate": p.roll_rate, "pitch": p.pitch, "heave": p.heave }))
        }
        "wave_base_transform_point" => {
            let bp = BasePose { roll: f(i, "roll")?, pitch: f(i, "pitch")?, heave: f(i, "heave")?, ..BasePose::default() };
            let t = base_transform(&bp);
            Ok(json!({ "rotation": m3j(&t.orientation.to_rotation()), "point": v3j(&t.transform_point(&vec3(&i["point"])?)) }))
        }
        "uav_velocity_passthrough" | "uav_tilted_thrust" | "uav_derivative_generic" => {
            let d = uav_derivative(&uav_state(&i["state"])?, &thrusts(&i["thrusts"])?, &UavParams::default()).map_err(err)?;
            Ok(match case.name.as_str() {
                "uav_velocity_passthrough" => {
                    json!({ "position_rate": v3j(&d.velocity), "acceleration": v3j(&d.acceleration) })
                }
                "uav_tilted_thrust" => json!({ "acceleration": v3j(&d.acceleration) }),
                _ => json!({
                    "position_rate": v3j(&d.velocity),
                    "acceleration": v3j(&d.acceleration),
                    "orientation_rate": d.orientation_rate,
                    "angular_acceleration": v3j(&d.angular_acceleration),
                }),
            })
        }
        "uav_rk4_matches_adaptive_reference" => {
            let (p, cmd) = (UavParams::default(), thrusts(&i["thrusts"])?);
            let mut s = uav_state(&i["state"])?;
            for _ in 0..u(i, "steps")? {
                s = integrate_uav(&s, &cmd, &p, f(i, "dt")?).map_err(err)?;
            }
            Ok(uav_state_json(&s))
        }
        "uav_step_response" => {
            let (p, gains, dt) = (UavParams::default(), PdGains::default(), f(i, "dt")?);
            let start = vec3(&i["start"])?;
            let reference = start + vec3(&i["step_m"])?;
            let mut s = UavState::at_rest(start);
            let mut mem = PdMemory::default();
            let mut xs = Vec::new();
            for _ in 0..(f(i, "duration_s")? / dt).round() as usize {
                let o = cascaded_pd(&s, &reference, 0.0, &gains, &p, &mem, dt).map_err(err)?;
                mem = o.memory;
                s = integrate_uav(&s, &o.command, &p, dt).map_err(err)?;
                xs.push(s.position.x);
            }
            let band = f(i, "band_m")?;
            let overshoot = xs.iter().copied().fold(f64::MIN, f64::max) - reference.x;
            let settle = xs.iter().rposition(|x| (x - reference.x).abs() > band).map_or(0.0, |k| (k + 1) as f64 * dt);
            Ok(json!({ "overshoot_m": overshoot, "settling_time_s": settle }))
        }
        "arm_fk_zero" | "arm_fk_zero_rolled_base" | "arm_fk_home" => {
            let x = forward_kinematics(&ArmModel::default(), &joints(&i["q"])?, &pose(&i["base"])?);
            Ok(json!({ "rotation": m3j(&x.orientation.to_rotation()), "position": v3j(&x.position) }))
        }
        "arm_jacobian_finite_difference" => {
            let j = geometric_jacobian(&ArmModel::default(), &joints(&i["q"])?, &pose(&i["base"])?);
            Ok(json!({ "jacobian": (0..6).map(|r| (0..7).map(|c| j[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>() }))
        }
        "arm_joint1_twist" => {
            let t = end_effector_twist(&ArmModel::default(), &joints(&i["q"])?, &joints(&i["q_dot"])?, &pose(&i["base"])?);
            Ok(json!({ "linear": [t[0], t[1], t[2]], "angular": [t[3], t[4], t[5]] }))
        }
        "arm_limit_position_high" => {
            let report = check_limits(&ArmModel::default(), &joints(&i["q"])?, &joints(&i["q_dot"])?, &joints(&i["u"])?);
            let v: Vec<Value> = report.violations.iter().map(|v| json!({ "kind": v.kind, "index": v.index, "margin": v.margin })).collect();
            Ok(json!({ "violations": v }))
        }
        "arm_discrete_model_dt_0_05" => {
            let m = build_discrete_model(f(i, "dt")?).map_err(err)?;
            let rows = |r: usize, c: usize, at: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
                (0..r).map(|i| (0..c).map(|j| at(i, j)).collect()).collect()
            };
            Ok(json!({
                "a_d": rows(14, 14, &|r, c| m.a_d[(r, c)]),
                "b_d": rows(14, 7, &|r, c| m.b_d[(r, c)]),
                "outside_recommended_range": m.outside_recommended_range,
            }))
        }
        "eskf_cv_predict_covariance" | "eskf_ca_predict_covariance" => {
            let kind: MotionKind = serde_json::from_value(i["kind"].clone()).map_err(err)?;
            let model = TargetMotionModel { kind, process_density: f(i, "process_density")?, attitude_density: f(i, "attitude_density")? };
            let mut state = filter(model)?;
            let rows: Vec<Vec<f64>> = i["covariance"].as_array().ok_or("covariance")?.iter().map(floats).collect::<Result<_, _>>()?;
            let n = rows.len();
            state.covariance = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
            let next = eskf::predict(&state, f(i, "dt")?).map_err(err)?;
            Ok(json!({ "covariance": dmj(&next.covariance), "process_noise": dmj(&next.last_process_noise) }))
        }
        "eskf_scalar_kalman_gain" => {
            let mut state = filter(TargetMotionModel::default())?;
            state.nominal.position = vec3(&i["prior_position"])?;
            let p0 = f(i, "prior_variance")?;
            for k in 0..3 {
                state.covariance[(k, k)] = p0;
            }
            let z = eskf::Measurement {
                position: vec3(&i["measured_position"])?,
                orientation: None,
                stamp: state.nominal.stamp,
                r_override: Some(DMatrix::identity(3, 3) * f(i, "measurement_variance")?),
            };
            let post = eskf::update(&state, &z).map_err(err)?.state;
            let var: Vec<f64> = (0..3).map(|k| post.covariance[(k, k)]).collect();
            Ok(json!({ "position": v3j(&post.nominal.position), "position_variance": var }))
        }
        "eskf_ca_extrapolation" => {
            let model = TargetMotionModel { kind: MotionKind::ConstantAcceleration, ..TargetMotionModel::default() };
            let mut state = filter(model)?;
            state.nominal.position = vec3(&i["position"])?;
            state.nominal.velocity = vec3(&i["velocity"])?;
            state.nominal.acceleration = vec3(&i["acceleration"])?;
            let x = eskf::extrapolate(&state, f(i, "lead_s")?, 10).map_err(err)?;
            Ok(json!({ "position": v3j(&x.last_pose().position) }))
        }
        "replay_constant_velocity_trace" => {
            let (p0, v) = (vec3(&i["start"])?, vec3(&i["velocity"])?);
            let n = (f(i, "duration_s")? * f(i, "rate_hz")?).round() as usize;
            let dt = 1.0 / f(i, "rate_hz")?;
            let samples: Vec<TraceSample> = (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    TraceSample { t, position: p0 + v * t, orientation: Some(UnitQuaternion::identity()) }
                })
                .collect();
            let settings = ReplaySettings { lead_s: f(i, "lead_s")?, ..ReplaySettings::default() };
            let rows = replay(&samples, &settings).map_err(err)?;
            Ok(json!({ "final_prediction": v3j(&rows.last().ok_or("empty replay")?.predicted_position) }))
        }
        "control_cost_summation" => cost_summation(i),
        "control_single_step_least_squares" => single_step(i),
        "control_static_target_terminal_error" => static_target(i),
        "control_following_direction" => following_direction(i),
        "control_one_step_gauss_newton" => one_step(i),
        "control_shrinking_vs_fixed" => shrinking_vs_fixed(i),
        "control_warm_start_saves_iterations" => warm_start(i),
        "mission_scripted_sequence" => scripted_mission(i),
        "mission_unreachable_target_aborts" => {
            let target = Pose6::from_translation(vec3(&i["target"])?);
            let d = delivery_decide(
                i["cargo_ready"].as_bool().unwrap_or(false),
                &target,
                &ArmModel::default(),
                f(i, "deadline_remaining_s")?,
                f(i, "estimated_completion_s")?,
                &ReachProbe::default(),
            );
            Ok(json!({ "target_reachable": d.target_reachable, "verdict": d.verdict }))
        }
        "harness_metrics_small_log" => metrics(i),
        other => Err(format!("no library adapter for case `{other}`")),
    }
}

fn filter(model: TargetMotionModel) -> Result<ErrorFilterState, String> {
    let nominal = NominalState {
        position: Vector3::zeros(),
        velocity: Vector3::zeros(),
        acceleration: Vector3::zeros(),
        orientation: UnitQuaternion::identity(),
        stamp: 0.0,
    };
    ErrorFilterState::new(model, nominal, &InitialUncertainty::default(), 0.005, 0.5f64.to_radians()).map_err(err)
}

fn cost_summation(i: &Value) -> Out {
    let r: [f64; 7] = floats(&i["r"])?.try_into().map_err(|_| "r")?;
    let posture: [f64; 7] = floats(&i["posture"])?.try_into().map_err(|_| "posture")?;
    let weights = CostWeights::diagonal(weights6(&i["q"])?, r, weights6(&i["q_n"])?).with_posture(posture, &joints(&i["posture_reference"])?);
    let list = |key: &str| i[key].as_array().cloned().ok_or_else(|| format!("input `{key}`"));
    let controls: Vec<Joints> = list("controls")?.iter().map(joints).collect::<Result<_, _>>()?;
    let states = list("states_q")?.iter().map(|q| Ok(JointState { q: joints(q)?, q_dot: Joints::zeros(), stamp: 0.0 })).collect::<Result<_, String>>()?;
    let ee_poses: Vec<Pose6> = list("ee_poses")?.iter().map(pose).collect::<Result<_, _>>()?;
    let target: Vec<Pose6> = list("target")?.iter().map(pose).collect::<Result<_, _>>()?;
    let plan = HorizonPlan {
        controls,
        states,
        ee_poses,
        cost: f64::NAN,
        passes: 0,
        qp_iterations: 0,
        kkt_residual: f64::NAN,
        solve_time_s: 0.0,
        feasible: true,
        status: PlanStatus::Converged,
        active_rows: Vec::new(),
    };
    Ok(json!({ "cost": evaluate_cost(&plan, &target, &weights).map_err(err)? }))
}

fn single_step(i: &Value) -> Out {
    let model = build_discrete_model(f(i, "dt")?).map_err(err)?;
    let (qw, rw) = (f(i, "q_weight")?, f(i, "r_weight")?);
    let z0 = JointState { q: joints(&i["p0"])?, q_dot: joints(&i["v0"])?, stamp: 0.0 };
    let b_pos = model.b_d.fixed_rows::<7>(0).into_owned();
    let free = (model.a_d * z0.to_vector()).fixed_rows::<7>(0).into_owned();
    let hessian = (b_pos.transpose() * b_pos * qw + nalgebra::SMatrix::<f64, 7, 7>::identity() * rw) * 2.0;
    let linear = b_pos.transpose() * (free - joints(&i["p_star"])?) * (2.0 * qw);
    let problem = QpProblem::unconstrained(DMatrix::from_column_slice(7, 7, hessian.as_slice()), DVector::from_column_slice(linear.as_slice()));
    let x = solve_qp(&problem, &QpSettings::default()).map_err(err)?.x;
    Ok(json!({ "u": x.as_slice() }))
}

fn static_target(i: &Value) -> Out {
    let model = ArmModel::default();
    let h = u(i, "horizon")?;
    let home = forward_kinematics(&model, &model.home(), &Pose6::identity());
    let target = Pose6::new(home.position + vec3(&i["offset"])?, home.orientation);
    let probe = ReachProbe::default();
    let settings = PlannerSettings { dt: f(i, "dt")?, ..probe.settings };
    let plan = solve_horizon(
        &JointState::at_rest(model.home()),
        &vec![target; h + 1],
        &vec![Pose6::identity(); h + 1],
        &model,
        &probe.weights,
        h,
        None,
        &settings,
    )
    .map_err(err)?;
    if !plan.feasible {
        return Err("static-target plan is not feasible".into());
    }
    let reached = forward_kinematics(&model, &plan.states[h - 1].q, &Pose6::identity()).position;
    Ok(json!({ "terminal_error_m": (reached - target.position).norm() }))
}

fn following_direction(i: &Value) -> Out {
    let model = ArmModel::default();
    let z0 = JointState::at_rest(model.home());
    let ee = forward_kinematics(&model, &z0.q, &Pose6::identity());
    let target = Pose6::new(ee.position + vec3(&i["offset"])?, ee.orientation);
    let gains = FollowingGains { damping: f(i, "damping")?, ..FollowingGains::default() };
    let acc = simple_following_step(&z0, &target, &Vector6::zeros(), &model, &Pose6::identity(), &gains, 0.025);
    let a = geometric_jacobian(&model, &z0.q, &Pose6::identity()) * acc;
    Ok(json!({ "task_acceleration_direction": a.normalize().as_slice() }))
}

fn one_step(i: &Value) -> Out {
    let model = ArmModel::default();
    let z0 = JointState { q: joints(&i["q0"])?, q_dot: joints(&i["q_dot0"])?, stamp: 0.0 };
    let target = pose(&i["target"])?;
    let weights = CostWeights::diagonal(weights6(&i["q"])?, [f(i, "r")?; 7], weights6(&i["q_n"])?);
    let settings = PlannerSettings { dt: f(i, "dt")?, max_passes: 30, convergence_tol: 1e-15, ..PlannerSettings::default() };
    let plan = solve_horizon(&z0, &[target; 2], &[Pose6::identity(); 2], &model, &weights, 1, None, &settings).map_err(err)?;
    Ok(json!({ "u": plan.controls[0].as_slice(), "cost": plan.cost }))
}

/// Closes the loop against a constant-velocity target with both horizon
/// strategies and returns the ratio of summed squared position errors.
fn shrinking_vs_fixed(i: &Value) -> Out {
    let model = ArmModel::default();
    let (ticks, dt) = (u(i, "ticks")?, f(i, "dt")?);
    let controller = ControllerSettings::default();
    let weights = controller.adapted_weights(0.0, &model.home());
    let settings = PlannerSettings { dt, max_passes: controller.max_relinearizations, ..PlannerSettings::default() };
    let h = controller.horizon_steps;
    let home = forward_kinematics(&model, &model.home(), &Pose6::identity());
    let (start, velocity) = (home.position + vec3(&i["offset"])?, vec3(&i["velocity"])?);
    let target_at = |t: f64| Pose6::new(start + velocity * t, home.orientation);
    let base = vec![Pose6::identity(); h + 1];
    let track = |t: f64| (0..=h).map(|k| target_at(t + k as f64 * dt)).collect::<Vec<_>>();

    let run = |shrinking: bool| -> Result<f64, String> {
        let mut z = JointState::at_rest(model.home());
        let mut rhc = RhcState::new(h, 0.0, dt).with_min_horizon(controller.min_horizon_steps);
        let mut previous: Option<HorizonPlan> = None;
        let mut total = 0.0;
        for k in 0..ticks {
            let t = k as f64 * dt;
            let u = if shrinking {
                let (u, _, next) = shrinking_horizon_step(&rhc, t, &z, &track(t), &base, &model, &weights, &settings).map_err(err)?;
                rhc = next;
                u
            } else {
                let (u, plan) = fixed_horizon_step(&z, &track(t), &base, &model, &weights, h, previous.as_ref(), &settings).map_err(err)?;
                previous = Some(plan);
                u
            };
            z = JointState { q: z.q + z.q_dot * dt + u * (0.5 * dt * dt), q_dot: z.q_dot + u * dt, stamp: t + dt };
            let ee = forward_kinematics(&model, &z.q, &Pose6::identity());
            total += (ee.position - target_at(t + dt).position).norm_squared();
        }
        Ok(total)
    };
    Ok(json!({ "tracking_cost_ratio": run(true)? / run(false)? }))
}

/// Smallest per-instance saving of QP iterations when the second solve is
/// seeded with the shifted first solution instead of zero controls.
fn warm_start(i: &Value) -> Out {
    let model = ArmModel::default();
    let (h, dt) = (u(i, "horizon")?, f(i, "dt")?);
    let controller = ControllerSettings::default();
    let weights = controller.adapted_weights(5f64.to_radians(), &model.home());
    let settings = PlannerSettings { dt, max_passes: controller.max_relinearizations, ..PlannerSettings::default() };
    let mut worst = f64::INFINITY;
    for n in 0..u(i, "instances")? {
        let inst = bench_instance(&model, i["seed"].as_u64().unwrap_or(0), n as u64, h + 1, dt);
        let first = solve_horizon(&inst.z0, &inst.target_traj, &inst.base_traj, &model, &weights, h, None, &settings).map_err(err)?;
        let z1 = first.states[0];
        let (target, base) = (&inst.target_traj[1..], &inst.base_traj[1..]);
        let cold = solve_horizon(&z1, target, base, &model, &weights, h, None, &settings).map_err(err)?;
        let warm = solve_horizon(&z1, target, base, &model, &weights, h, Some(&first.shifted(h)), &settings).map_err(err)?;
        worst = worst.min(cold.qp_iterations as f64 - warm.qp_iterations as f64);
    }
    Ok(json!({ "cold_minus_warm_iterations": worst }))
}

fn scripted_mission(i: &Value) -> Out {
    let thresholds = wavecatch::CaptureThresholds::default();
    let (tick, e0, speed, after) = (f(i, "tick_s")?, f(i, "initial_error_m")?, f(i, "relative_speed_m_s")?, f(i, "retracted_after_s")?);
    let mut state = CaptureState::new(0.0);
    let mut events = Vec::new();
    for k in 0..u(i, "ticks")? {
        let t = k as f64 * tick;
        let obs = CaptureObservation {
            t,
            ee_pose: Pose6::from_translation(Vector3::new((e0 - t).max(0.0), 0.0, 0.0)),
            ee_stamp: t,
            target_pose: Pose6::identity(),
            target_stamp: t,
            relative_speed: speed,
            plan_feasible: true,
            retracted: t > after,
        };
        let out = capture_tick(&state, &obs, &thresholds);
        if let Some(e) = out.event {
            events.push(json!({ "t": e.t, "to": e.to }));
        }
        state = out.state;
    }
    Ok(json!({ "events": events, "final_phase": state.phase }))
}

fn metrics(i: &Value) -> Out {
    let rows = i["rows"]
        .as_array()
        .ok_or("input `rows`")?
        .iter()
        .map(|r| {
            let ee = pose(&r["ee"])?;
            let target = pose(&r["target"])?;
            Ok(TrialRow {
                t: f(r, "t")?,
                phase: serde_json::from_value(r["phase"].clone()).map_err(err)?,
                target_truth: target,
                target_estimate: target,
                target_prediction: [target.position.x, target.position.y, target.position.z],
                q: Joints::zeros(),
                q_dot: Joints::zeros(),
                ee_pose: ee,
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
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let s = compute_metrics(&rows);
    Ok(json!({
        "success": s.success,
        "time_to_capture_s": s.time_to_capture_s,
        "window_ticks": s.window_ticks,
        "rms_position_error_m": s.rms_position_error_m,
        "mean_position_error_m": s.mean_position_error_m,
        "max_orientation_error_deg": s.max_orientation_error_deg,
    }))
}
