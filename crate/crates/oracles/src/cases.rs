//! The oracle case set. Inputs are plain JSON; expected values come from the
//! naive modules only.

use serde_json::{json, Value};

use crate::naive::*;
use crate::naive_sim::*;
use crate::{Comparison, OracleCase};

fn case(name: &str, inputs: Value, expected: Value, tolerance: f64, method: &str, comparison: Comparison) -> OracleCase {
    OracleCase { name: name.into(), inputs, expected, tolerance, method: method.into(), comparison }
}

pub fn m3_json(m: &M3) -> Value {
    json!(m.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

pub fn pose_json(p: &V3, q: &Quat) -> Value {
    json!({ "position": p, "orientation": q })
}

fn joints_limits() -> ([f64; 7], [f64; 7]) {
    let hi = [170.0f64, 120.0, 170.0, 120.0, 170.0, 120.0, 175.0].map(f64::to_radians);
    (hi.map(|v| -v), hi)
}

const HOME: [f64; 7] = [0.0, 0.1, 0.0, -1.9, 0.0, -1.2, 0.0];
const QD_MAX: [f64; 7] = [3.2, 3.2, 3.5, 3.5, 4.0, 4.5, 4.5];
const WS_MIN: V3 = [-0.9, -0.9, 0.15];
const WS_MAX: V3 = [0.9, 0.9, 1.1];

fn deck_fk(q: &[f64]) -> (M3, V3) {
    dh_fk(&reference_arm(), q, &eye(4))
}

/// Rotation-vector error `log(R_tᵀ R_a)` and position difference, actual minus target.
fn pose_err(ra: &M3, pa: &V3, rt: &M3, pt: &V3) -> [f64; 6] {
    let dr = m3_log(&m3_mul(&m3_transpose(rt), ra));
    let dp = v_sub(pa, pt);
    [dp[0], dp[1], dp[2], dr[0], dr[1], dr[2]]
}

pub fn oracle_cases() -> Vec<OracleCase> {
    let mut out = Vec::new();
    out.extend(frames_cases());
    out.extend(wave_cases());
    out.extend(uav_cases());
    out.extend(arm_cases());
    out.extend(eskf_cases());
    out.extend(control_cases());
    out.extend(mission_cases());
    out
}

fn frames_cases() -> Vec<OracleCase> {
    let (r, p, y) = (0.1, 0.2, 0.3);
    let euler = case(
        "frames_euler_to_rotation",
        json!({ "roll": r, "pitch": p, "yaw": y }),
        json!({ "rotation": m3_json(&rpy(r, p, y)), "round_trip": [r, p, y] }),
        1e-12,
        "product of elementary rotations Rz·Ry·Rx",
        Comparison::Abs,
    );

    let norm = case(
        "frames_rotation_preserves_norm",
        json!({ "samples": 1000, "seed": 11 }),
        json!({ "max_norm_deviation": 1e-12 }),
        0.0,
        "rotations are isometries; bound on floating-point drift",
        Comparison::UpperBound,
    );

    let qt = q_axis_angle(&[1.0, 2.0, 3.0], 0.7);
    let qa = q_mul(&qt, &q_axis_angle(&[0.0, 0.0, 1.0], 0.2));
    let (pt, pa) = ([0.4, -0.1, 0.9], [0.43, -0.12, 0.95]);
    let err = pose_err(&q_to_m3(&qa), &pa, &q_to_m3(&qt), &pt);
    let pose_error = case(
        "frames_pose_error_about_z",
        json!({ "actual": pose_json(&pa, &qa), "target": pose_json(&pt, &qt) }),
        json!({ "error": err }),
        1e-12,
        "matrix logarithm of R_targetᵀ·R_actual",
        Comparison::Abs,
    );
    vec![euler, norm, pose_error]
}

fn wave_cases() -> Vec<OracleCase> {
    let (amp, w, ph, t): (f64, [f64; 2], [f64; 2], f64) = (0.08, [0.8, 1.3], [0.2, 1.0], 1.7);
    let roll: f64 = (0..2).map(|i| 0.5 * amp * (w[i] * t + ph[i]).sin()).sum();
    let rate: f64 = (0..2).map(|i| 0.5 * amp * w[i] * (w[i] * t + ph[i]).cos()).sum();
    let two = case(
        "wave_roll_two_components",
        json!({ "roll_amplitude_rad": amp, "frequencies": w, "phases": ph, "t": t }),
        json!({ "roll": roll, "roll_rate": rate, "pitch": 0.0, "heave": 0.0 }),
        1e-12,
        "closed-form sum of sines with the amplitude split evenly",
        Comparison::Abs,
    );

    let (roll, pitch, heave, point) = (0.1, -0.05, 0.3, [0.2, -0.1, 0.5]);
    let rot = rpy(roll, pitch, 0.0);
    let moved = v_add(&m3_vec(&rot, &point), &[0.0, 0.0, heave]);
    let base = case(
        "wave_base_transform_point",
        json!({ "roll": roll, "pitch": pitch, "heave": heave, "point": point }),
        json!({ "rotation": m3_json(&rot), "point": moved }),
        1e-12,
        "Ry(pitch)·Rx(roll) rotation then heave translation",
        Comparison::Abs,
    );
    vec![two, base]
}

fn quad_state_json(x: &QuadState) -> Value {
    json!({
        "position": &x[0..3],
        "velocity": &x[3..6],
        "orientation": &x[6..10],
        "body_rates": &x[10..13],
    })
}

fn uav_cases() -> Vec<OracleCase> {
    let c = Quad::reference();
    let mut out = Vec::new();

    let mut x = quad_rest([1.0, 2.0, 3.0]);
    x[3..6].copy_from_slice(&[12.5, 0.0, -3.0]);
    let hover = [c.mass * c.gravity / 4.0; 4];
    let d = quad_derivative(&x, &hover, &c);
    out.push(case(
        "uav_velocity_passthrough",
        json!({ "state": quad_state_json(&x), "thrusts": hover }),
        json!({ "position_rate": &d[0..3], "acceleration": &d[3..6] }),
        1e-12,
        "kinematic identity ṗ = v at hover thrust",
        Comparison::Abs,
    ));

    let mut x = quad_rest([0.0, 0.0, 2.0]);
    x[6..10].copy_from_slice(&q_axis_angle(&[0.0, 1.0, 0.0], 0.1));
    let total = 16.0;
    let acc = [0.1f64.sin() * total / c.mass, 0.0, 0.1f64.cos() * total / c.mass - c.gravity];
    out.push(case(
        "uav_tilted_thrust",
        json!({ "state": quad_state_json(&x), "thrusts": vec![total / 4.0; 4] }),
        json!({ "acceleration": acc }),
        1e-12,
        "thrust along the body z axis pitched by 0.1 rad",
        Comparison::Abs,
    ));

    let mut x = quad_rest([0.0, 0.0, 2.0]);
    x[3..6].copy_from_slice(&[0.3, -0.2, 0.1]);
    x[6..10].copy_from_slice(&q_normalize(&[0.98, 0.1, -0.05, 0.15]));
    x[10..13].copy_from_slice(&[0.4, -0.3, 0.7]);
    let thrusts = [3.9, 3.5, 3.8, 3.6];
    let d = quad_derivative(&x, &thrusts, &c);
    out.push(case(
        "uav_derivative_generic",
        json!({ "state": quad_state_json(&x), "thrusts": thrusts }),
        json!({
            "position_rate": &d[0..3],
            "acceleration": &d[3..6],
            "orientation_rate": &d[6..10],
            "angular_acceleration": &d[10..13],
        }),
        1e-12,
        "Newton-Euler equations and quaternion kinematics written out directly",
        Comparison::Abs,
    ));

    let end = quad_flow(&x, &thrusts, &c, 1.0);
    out.push(case(
        "uav_rk4_matches_adaptive_reference",
        json!({ "state": quad_state_json(&x), "thrusts": thrusts, "steps": 200, "dt": 0.005 }),
        quad_state_json(&end),
        1e-6,
        "adaptive Dormand-Prince 5(4) at 1e-12 relative tolerance",
        Comparison::Abs,
    ));

    let dt = 0.005;
    let reference = [1.0, 0.0, 2.0];
    let gains = PdLoop::reference();
    let mut s = quad_rest([0.0, 0.0, 2.0]);
    let mut mem = PdMem::default();
    let mut xs = Vec::new();
    for _ in 0..2000 {
        let (f, m) = pd_command(&s, &reference, &c, &gains, &mem, dt);
        mem = m;
        s = quad_flow(&s, &f, &c, dt);
        xs.push(s[0]);
    }
    let overshoot = xs.iter().copied().fold(f64::MIN, f64::max) - 1.0;
    let settle = xs.iter().rposition(|x| (x - 1.0).abs() > 0.05).map_or(0.0, |i| (i + 1) as f64 * dt);
    out.push(case(
        "uav_step_response",
        json!({ "step_m": [1.0, 0.0, 0.0], "start": [0.0, 0.0, 2.0], "dt": dt, "duration_s": 10.0, "band_m": 0.05 }),
        json!({ "overshoot_m": overshoot, "settling_time_s": settle }),
        dt + 1e-9,
        "independent cascaded PD loop over an adaptive-step plant",
        Comparison::Abs,
    ));
    out
}

fn arm_cases() -> Vec<OracleCase> {
    let links = reference_arm();
    let mut out = Vec::new();
    let fk_case = |name: &str, q: [f64; 7], base_q: Quat, base_p: V3| {
        let (r, p) = dh_fk(&links, &q, &h_from(&q_to_m3(&base_q), &base_p));
        case(
            name,
            json!({ "q": q, "base": pose_json(&base_p, &base_q) }),
            json!({ "rotation": m3_json(&r), "position": p }),
            1e-12,
            "product of 4x4 modified-DH transforms",
            Comparison::Abs,
        )
    };
    out.push(fk_case("arm_fk_zero", [0.0; 7], [1.0, 0.0, 0.0, 0.0], [0.0; 3]));
    out.push(fk_case("arm_fk_zero_rolled_base", [0.0; 7], q_axis_angle(&[1.0, 0.0, 0.0], 0.1), [0.0; 3]));
    out.push(fk_case("arm_fk_home", HOME, [1.0, 0.0, 0.0, 0.0], [0.0; 3]));

    let q = [0.3, -0.4, 0.5, -1.2, 0.2, 0.7, -0.3];
    let base_q = q_normalize(&[0.999, 0.03, -0.02, 0.0]);
    let base_p = [0.0, 0.0, 0.1];
    let base = h_from(&q_to_m3(&base_q), &base_p);
    let h = 1e-6;
    let mut jac = vec![vec![0.0; 7]; 6];
    for i in 0..7 {
        let (mut qp, mut qm) = (q, q);
        qp[i] += h;
        qm[i] -= h;
        let (rp, pp) = dh_fk(&links, &qp, &base);
        let (rm, pm) = dh_fk(&links, &qm, &base);
        let w = m3_log(&m3_mul(&rp, &m3_transpose(&rm)));
        for k in 0..3 {
            jac[k][i] = (pp[k] - pm[k]) / (2.0 * h);
            jac[3 + k][i] = w[k] / (2.0 * h);
        }
    }
    out.push(case(
        "arm_jacobian_finite_difference",
        json!({ "q": q, "base": pose_json(&base_p, &base_q) }),
        json!({ "jacobian": jac }),
        1e-5,
        "central differences of the DH chain, angular part from log(R+ R-ᵀ)",
        Comparison::Abs,
    ));

    let base_q = q_axis_angle(&[1.0, 0.0, 0.0], 0.08);
    let base = h_from(&q_to_m3(&base_q), &[0.0; 3]);
    let frames = dh_chain(&links, &HOME, &base);
    let (r1, o1) = h_parts(&frames[0]);
    let (_, tip) = h_parts(frames.last().unwrap());
    let axis = [r1[0][2], r1[1][2], r1[2][2]];
    let linear = cross(&axis, &v_sub(&tip, &o1));
    out.push(case(
        "arm_joint1_twist",
        json!({ "q": HOME, "q_dot": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], "base": pose_json(&[0.0; 3], &base_q) }),
        json!({ "linear": linear, "angular": m3_vec(&q_to_m3(&base_q), &[0.0, 0.0, 1.0]) }),
        1e-12,
        "rotation about the first joint axis, which is the deck normal",
        Comparison::Abs,
    ));

    let (q_min, q_max) = joints_limits();
    let mut q = HOME;
    q[0] = q_max[0] + QD_MAX[0] * 0.025;
    let mut violations = Vec::new();
    for i in 0..7 {
        for (kind, m) in [("position_low", q_min[i] - q[i]), ("position_high", q[i] - q_max[i])] {
            if m > 0.0 {
                violations.push(json!({ "kind": kind, "index": i, "margin": m }));
            }
        }
    }
    let (_, p) = deck_fk(&q);
    for k in 0..3 {
        for (kind, m) in [("workspace_low", WS_MIN[k] - p[k]), ("workspace_high", p[k] - WS_MAX[k])] {
            if m > 0.0 {
                violations.push(json!({ "kind": kind, "index": k, "margin": m }));
            }
        }
    }
    out.push(case(
        "arm_limit_position_high",
        json!({ "q": q, "q_dot": vec![0.0; 7], "u": vec![0.0; 7] }),
        json!({ "violations": violations }),
        1e-12,
        "joint 1 driven one tick at full speed past its upper bound",
        Comparison::Abs,
    ));

    // z = [q; q_dot], dz/dt = A z + B u: exp(A dt) and ∫ exp(A s) B ds by power series
    let dt: f64 = 0.05;
    let n = 14;
    let mut a = zeros(n, n);
    let mut b = zeros(n, 7);
    for i in 0..7 {
        a[i][7 + i] = 1.0;
        b[7 + i][i] = 1.0;
    }
    let (mut a_d, mut b_d) = (eye(n), zeros(n, 7));
    let mut term = eye(n);
    let mut fact = 1.0;
    for k in 1..12 {
        // term = A^(k-1)
        let integral_scale = dt.powi(k) / (fact * k as f64);
        let tb = matmul(&term, &b);
        for r in 0..n {
            for c in 0..7 {
                b_d[r][c] += tb[r][c] * integral_scale;
            }
        }
        term = matmul(&term, &a);
        fact *= k as f64;
        let scale = dt.powi(k) / fact;
        for r in 0..n {
            for c in 0..n {
                a_d[r][c] += term[r][c] * scale;
            }
        }
    }
    out.push(case(
        "arm_discrete_model_dt_0_05",
        json!({ "dt": dt }),
        json!({ "a_d": a_d, "b_d": b_d, "outside_recommended_range": false }),
        1e-15,
        "power series of the matrix exponential of the continuous double integrator",
        Comparison::Abs,
    ));
    out
}

fn random_spd(n: usize, seed: u64) -> Mat {
    let mut rng = Lcg::new(seed);
    let l: Mat = (0..n).map(|_| (0..n).map(|_| rng.symmetric(0.3)).collect()).collect();
    let mut p = matmul(&l, &transpose(&l));
    for (i, row) in p.iter_mut().enumerate() {
        row[i] += 0.01;
    }
    p
}

fn eskf_cases() -> Vec<OracleCase> {
    let mut out = Vec::new();
    for (name, kind, order, density, seed) in
        [("eskf_cv_predict_covariance", "constant_velocity", 2, 0.5, 3), ("eskf_ca_predict_covariance", "constant_acceleration", 3, 50.0, 4)]
    {
        let n = 3 * order + 3;
        let p = random_spd(n, seed);
        let dt = 0.05;
        let (f, q) = discretize(order, density, 1e-4, dt);
        let next = add(&matmul(&matmul(&f, &p), &transpose(&f)), &q);
        out.push(case(
            name,
            json!({ "kind": kind, "process_density": density, "attitude_density": 1e-4, "dt": dt, "covariance": p }),
            json!({ "covariance": next, "process_noise": q }),
            1e-12,
            "matrix exponential series and Gauss-Legendre integration of the noise",
            Comparison::Abs,
        ));
    }

    // P = R = 1 on a position axis gives K = 1/2 and posterior variance 1/2.
    out.push(case(
        "eskf_scalar_kalman_gain",
        json!({ "prior_position": [0.0, 0.0, 0.0], "prior_variance": 1.0, "measured_position": [1.0, -2.0, 0.5], "measurement_variance": 1.0 }),
        json!({ "position": [0.5, -1.0, 0.25], "position_variance": [0.5, 0.5, 0.5] }),
        1e-12,
        "scalar Kalman gain P/(P+R)",
        Comparison::Abs,
    ));

    let (a, lead): (f64, f64) = (0.2, 0.5);
    out.push(case(
        "eskf_ca_extrapolation",
        json!({ "position": [0.5, 0.0, 1.0], "velocity": [0.0, 0.0, 0.0], "acceleration": [0.0, 0.0, a], "lead_s": lead }),
        json!({ "position": [0.5, 0.0, 1.0 + 0.5 * a * lead * lead] }),
        1e-12,
        "constant-acceleration kinematics, Δz = a t²/2",
        Comparison::Abs,
    ));

    let (p0, v) = ([0.5, -0.2, 0.8], [0.6, 0.3, -0.1]);
    let (duration, lead) = (1.0, 0.5);
    out.push(case(
        "replay_constant_velocity_trace",
        json!({ "start": p0, "velocity": v, "rate_hz": 100.0, "duration_s": duration, "lead_s": lead }),
        json!({ "final_prediction": v_add(&p0, &v_scale(&v, duration + lead)) }),
        1e-3,
        "straight-line motion extrapolated by the lead",
        Comparison::Abs,
    ));
    out
}

fn diag_json(v: &[f64]) -> Value {
    json!(v)
}

fn control_cases() -> Vec<OracleCase> {
    let mut out = Vec::new();

    // cost summation over a hand-made plan
    let mut rng = Lcg::new(21);
    let mut draw = |s: f64| rng.symmetric(s);
    let h = 3;
    let wq: Vec<f64> = (0..6).map(|_| 10.0 + 5.0 * draw(1.0)).collect();
    let wqn: Vec<f64> = (0..6).map(|_| 100.0 + 50.0 * draw(1.0)).collect();
    let wr: Vec<f64> = (0..7).map(|_| 0.02 + 0.01 * draw(1.0)).collect();
    let wp: Vec<f64> = (0..7).map(|_| 1.0 + 0.5 * draw(1.0)).collect();
    let pref: Vec<f64> = HOME.to_vec();
    let controls: Vec<Vec<f64>> = (0..h).map(|_| (0..7).map(|_| draw(5.0)).collect()).collect();
    let states: Vec<Vec<f64>> = (0..h).map(|_| (0..7).map(|i| HOME[i] + draw(0.3)).collect()).collect();
    let rand_pose = |d: &mut dyn FnMut(f64) -> f64| {
        let p = [0.5 + d(0.2), d(0.2), 0.6 + d(0.2)];
        let q = q_normalize(&[1.0, d(0.3), d(0.3), d(0.3)]);
        (p, q)
    };
    let ee: Vec<(V3, Quat)> = (0..=h).map(|_| rand_pose(&mut draw)).collect();
    let tg: Vec<(V3, Quat)> = (0..=h).map(|_| rand_pose(&mut draw)).collect();
    let mut j = 0.0;
    for k in 0..=h {
        let e = pose_err(&q_to_m3(&ee[k].1), &ee[k].0, &q_to_m3(&tg[k].1), &tg[k].0);
        let w = if k == h { &wqn } else { &wq };
        j += (0..6).map(|i| w[i] * e[i] * e[i]).sum::<f64>();
    }
    for u in &controls {
        j += (0..7).map(|i| wr[i] * u[i] * u[i]).sum::<f64>();
    }
    for q in &states {
        j += (0..7).map(|i| wp[i] * (q[i] - pref[i]).powi(2)).sum::<f64>();
    }
    let poses = |v: &[(V3, Quat)]| v.iter().map(|(p, q)| pose_json(p, q)).collect::<Vec<_>>();
    out.push(case(
        "control_cost_summation",
        json!({
            "q": diag_json(&wq), "q_n": diag_json(&wqn), "r": diag_json(&wr),
            "posture": diag_json(&wp), "posture_reference": pref,
            "controls": controls, "states_q": states, "ee_poses": poses(&ee), "target": poses(&tg),
        }),
        json!({ "cost": j }),
        1e-9,
        "explicit loop over stage, terminal, effort and posture terms",
        Comparison::Abs,
    ));

    // one joint-space step: min q‖q1 − p*‖² + r‖u‖² has a closed form per joint
    let (dt, qw, rw) = (0.05, 1000.0, 0.01);
    let b = 0.5 * dt * dt;
    let p_star = [0.1, -0.2, 0.3, -1.5, 0.05, -1.0, 0.2];
    let p0 = [0.09, -0.19, 0.31, -1.52, 0.04, -1.01, 0.21];
    let v0 = [0.1, 0.0, -0.2, 0.3, 0.0, 0.1, -0.1];
    let u: Vec<f64> = (0..7).map(|i| qw * b * (p_star[i] - p0[i] - dt * v0[i]) / (qw * b * b + rw)).collect();
    out.push(case(
        "control_single_step_least_squares",
        json!({ "dt": dt, "q_weight": qw, "r_weight": rw, "p_star": p_star, "p0": p0, "v0": v0 }),
        json!({ "u": u }),
        1e-8,
        "scalar normal equations with b = dt²/2",
        Comparison::Abs,
    ));

    let (_, home_p) = deck_fk(&HOME);
    let offset = [-0.1, 0.2, 0.2];
    let target = v_add(&home_p, &offset);
    assert!((0..3).all(|k| target[k] > WS_MIN[k] && target[k] < WS_MAX[k]), "static target leaves the workspace");
    out.push(case(
        "control_static_target_terminal_error",
        json!({ "offset": offset, "horizon": 20, "dt": 0.05 }),
        json!({ "terminal_error_m": 0.01 }),
        0.0,
        "required accuracy for a reachable static target 0.3 m away",
        Comparison::UpperBound,
    ));

    out.push(case(
        "control_following_direction",
        json!({ "offset": [0.01, 0.0, 0.0], "damping": 1e-6 }),
        json!({ "task_acceleration_direction": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0] }),
        1e-6,
        "a pure position error along x demands task acceleration along x",
        Comparison::Abs,
    ));

    // one-step horizon against Gauss-Newton on the same cost
    let q0 = [0.1, 0.2, -0.1, -1.7, 0.1, -1.1, 0.05];
    let qd0 = [0.05, -0.05, 0.0, 0.1, 0.0, -0.05, 0.0];
    let delta = [0.004, -0.003, 0.002, 0.005, -0.004, 0.003, 0.002];
    let qt: Vec<f64> = (0..7).map(|i| q0[i] + qd0[i] * dt + delta[i]).collect();
    let (rt, pt) = deck_fk(&qt);
    let qtq = {
        let v = m3_log(&rt);
        let n = v_norm(&v);
        q_axis_angle(&v, n)
    };
    let (wq1, wqn1, wr1): ([f64; 6], [f64; 6], f64) = ([100.0, 100.0, 100.0, 10.0, 10.0, 10.0], [1000.0, 1000.0, 1000.0, 100.0, 100.0, 100.0], 2e-2);
    let residual = |u: &[f64]| -> Vec<f64> {
        let q1: Vec<f64> = (0..7).map(|i| q0[i] + qd0[i] * dt + b * u[i]).collect();
        let (r1, p1) = deck_fk(&q1);
        let e = pose_err(&r1, &p1, &rt, &pt);
        (0..6).map(|i| wqn1[i].sqrt() * e[i]).chain((0..7).map(|i| wr1.sqrt() * u[i])).collect()
    };
    let (r0, p0e) = deck_fk(&q0);
    let e0 = pose_err(&r0, &p0e, &rt, &pt);
    let stage0: f64 = (0..6).map(|i| wq1[i] * e0[i] * e0[i]).sum();
    let mut u = vec![0.0; 7];
    for _ in 0..30 {
        let r = residual(&u);
        let mut jac = zeros(13, 7);
        for i in 0..7 {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[i] += 1e-6;
            um[i] -= 1e-6;
            let (rp, rm) = (residual(&up), residual(&um));
            for k in 0..13 {
                jac[k][i] = (rp[k] - rm[k]) / 2e-6;
            }
        }
        let jt = transpose(&jac);
        let step = solve(&matmul(&jt, &jac), &matvec(&jt, &r.iter().map(|v| -v).collect::<Vec<_>>()));
        for i in 0..7 {
            u[i] += step[i];
        }
    }
    let cost = stage0 + residual(&u).iter().map(|v| v * v).sum::<f64>();
    out.push(case(
        "control_one_step_gauss_newton",
        json!({
            "q0": q0, "q_dot0": qd0, "dt": dt, "target": pose_json(&pt, &qtq),
            "q": wq1, "q_n": wqn1, "r": wr1,
        }),
        json!({ "u": u, "cost": cost }),
        1e-5,
        "Gauss-Newton with finite-difference Jacobians of the DH chain",
        Comparison::Abs,
    ));

    out.push(case(
        "control_shrinking_vs_fixed",
        json!({ "ticks": 20, "dt": 0.05, "offset": [0.08, -0.05, 0.06], "velocity": [-0.4, 0.3, 0.0] }),
        json!({ "tracking_cost_ratio": 1.1 }),
        0.0,
        "shrinking horizon tracks no worse than 1.1 times the fixed horizon",
        Comparison::UpperBound,
    ));

    out.push(case(
        "control_warm_start_saves_iterations",
        json!({ "horizon": 20, "dt": 0.05, "seed": 5, "instances": 8 }),
        json!({ "cold_minus_warm_iterations": 0.0 }),
        0.0,
        "a shifted previous optimum is never a worse seed than zero controls",
        Comparison::LowerBound,
    ));
    out
}

fn mission_cases() -> Vec<OracleCase> {
    let mut out = Vec::new();
    let (tick, ticks, e0, speed, retract_after) = (0.025, 80, 0.31, 0.05, 1.71);
    let (radius, max_speed, dwell, lock) = (0.05, 0.2, 0.2, 0.5);
    let mut phase = "pose_sync";
    let (mut entered, mut since): (f64, Option<f64>) = (0.0, None);
    let mut events = Vec::new();
    for k in 0..ticks {
        let t = k as f64 * tick;
        let within = (e0 - t).max(0.0) <= radius;
        since = if phase == "approach_align" && within { Some(since.unwrap_or(t)) } else { None };
        let next = match phase {
            "pose_sync" => Some("intercept_plan"),
            "intercept_plan" => Some("approach_align"),
            "approach_align" if since.is_some_and(|s| t - s >= lock - 1e-9) && speed <= max_speed => Some("grasp"),
            "grasp" if !within => Some("intercept_plan"),
            "grasp" if t - entered >= dwell - 1e-9 => Some("retrieve"),
            "retrieve" if t > retract_after => Some("done"),
            _ => None,
        };
        if let Some(to) = next {
            events.push(json!({ "t": t, "to": to }));
            phase = to;
            entered = t;
            since = None;
        }
    }
    out.push(case(
        "mission_scripted_sequence",
        json!({ "tick_s": tick, "ticks": ticks, "initial_error_m": e0, "relative_speed_m_s": speed, "retracted_after_s": retract_after }),
        json!({ "events": events, "final_phase": phase }),
        1e-9,
        "hand-stepped guard table: sync, feasible plan, lock-on, dwell, retract",
        Comparison::Abs,
    ));

    let target = [2.0, 0.0, 0.5];
    let inside = (0..3).all(|k| target[k] >= WS_MIN[k] && target[k] <= WS_MAX[k]);
    out.push(case(
        "mission_unreachable_target_aborts",
        json!({ "target": target, "cargo_ready": true, "deadline_remaining_s": 10.0, "estimated_completion_s": 1.0 }),
        json!({ "target_reachable": inside, "verdict": if inside { "proceed" } else { "abort" } }),
        0.0,
        "the target lies outside the workspace box",
        Comparison::Exact,
    ));

    // four logged ticks; the window spans the first two
    let rows = [
        (0.0, "approach_align", [0.53, 0.04, 0.6], 0.0),
        (0.025, "grasp", [0.51, 0.0, 0.6], 2.0),
        (0.05, "retrieve", [0.5, 0.0, 0.55], 0.0),
        (0.075, "done", [0.5, 0.0, 0.5], 0.0),
    ];
    let tp = [0.5, 0.0, 0.6];
    let errs: Vec<f64> = rows[..2].iter().map(|r| v_norm(&v_sub(&r.2, &tp))).collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / 2.0).sqrt();
    let input_rows: Vec<Value> = rows
        .iter()
        .map(|(t, ph, p, deg)| {
            json!({
                "t": t, "phase": ph,
                "ee": pose_json(p, &q_axis_angle(&[0.0, 1.0, 0.0], f64::to_radians(*deg))),
                "target": pose_json(&tp, &[1.0, 0.0, 0.0, 0.0]),
            })
        })
        .collect();
    out.push(case(
        "harness_metrics_small_log",
        json!({ "rows": input_rows }),
        json!({
            "success": true, "time_to_capture_s": 0.075, "window_ticks": 2,
            "rms_position_error_m": rms, "mean_position_error_m": (errs[0] + errs[1]) / 2.0,
            "max_orientation_error_deg": 2.0,
        }),
        1e-12,
        "window from 0.5 s before the grasp tick up to the retrieve tick",
        Comparison::Abs,
    ));
    out
}
