//! Property suites shared by the regular integration tests (small counts) and
//! the acceptance target (full counts).

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use wavecatch::arm::{build_discrete_model, forward_kinematics, geometric_jacobian};
use wavecatch::eskf::{self, InitialUncertainty, MotionKind, NominalState};
use wavecatch::harness::{campaign_csv, run_campaign, trial_jsonl, CampaignSpec, ControllerKind, Scenario, TargetMotion};
use wavecatch::rng::{stream, SimRng};
use wavecatch::{ArmModel, ErrorFilterState, JointState, Joints, Measurement, Pose6, TargetMotionModel, UnitQuaternion};

pub fn gaussian(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian3(rng: &mut SimRng, sigma: f64) -> Vector3<f64> {
    Vector3::new(gaussian(rng), gaussian(rng), gaussian(rng)) * sigma
}

fn random_unit_quaternion(rng: &mut SimRng) -> UnitQuaternion {
    let axis = gaussian3(rng, 1.0);
    UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.0..3.0))
}

/// Smallest eigenvalue and largest asymmetry of a covariance.
pub fn psd_stats(p: &DMatrix<f64>) -> (f64, f64) {
    let asym = (p - p.transpose()).amax();
    let min_eig = p.clone().symmetric_eigen().eigenvalues.min();
    (min_eig, asym)
}

/// Random predict/update cycles on filters of both motion kinds. Returns the
/// worst `(min eigenvalue, asymmetry)` seen; errors name the failing cycle.
pub fn covariance_fuzz(cycles: usize, seed: u64) -> Result<(f64, f64), String> {
    let mut rng = stream(seed, 0);
    let mut worst = (f64::INFINITY, 0.0f64);
    let mut filter = None::<ErrorFilterState>;
    for cycle in 0..cycles {
        if cycle % 500 == 0 {
            let kind = if rng.random_bool(0.5) { MotionKind::ConstantVelocity } else { MotionKind::ConstantAcceleration };
            let model = TargetMotionModel {
                kind,
                process_density: 10f64.powf(rng.random_range(-3.0..2.0)),
                attitude_density: 10f64.powf(rng.random_range(-6.0..-1.0)),
            };
            let nominal = NominalState {
                position: gaussian3(&mut rng, 1.0),
                velocity: gaussian3(&mut rng, 0.5),
                acceleration: Vector3::zeros(),
                orientation: random_unit_quaternion(&mut rng),
                stamp: 0.0,
            };
            let initial = InitialUncertainty {
                position_m: 10f64.powf(rng.random_range(-3.0..0.0)),
                velocity_m_s: 10f64.powf(rng.random_range(-2.0..0.5)),
                acceleration_m_s2: 10f64.powf(rng.random_range(-2.0..1.0)),
                attitude_rad: 10f64.powf(rng.random_range(-3.0..-0.5)),
            };
            let sp = 10f64.powf(rng.random_range(-3.5..-1.0));
            let so = 10f64.powf(rng.random_range(-3.0..-1.0));
            filter = Some(ErrorFilterState::new(model, nominal, &initial, sp, so).map_err(|e| e.to_string())?);
        }
        let current = filter.take().expect("filter initialised");
        let next = if rng.random_bool(0.5) {
            eskf::predict(&current, rng.random_range(1e-3..0.1)).map_err(|e| format!("cycle {cycle}: {e}"))?
        } else {
            let stamp = current.nominal.stamp + rng.random_range(0.0..0.05);
            let spread = 10f64.powf(rng.random_range(-3.0..0.0));
            let position = current.nominal.position + gaussian3(&mut rng, spread);
            let mut z = Measurement::position(position, stamp);
            if rng.random_bool(0.5) {
                let spread = 10f64.powf(rng.random_range(-3.0..-0.5));
                let noise = gaussian3(&mut rng, spread);
                z.orientation = Some(current.nominal.orientation.mul(&UnitQuaternion::exp(&noise)));
            }
            if rng.random_bool(0.2) {
                let m = z.dim();
                let a = DMatrix::from_fn(m, m, |_, _| gaussian(&mut rng) * 1e-2);
                z.r_override = Some(&a * a.transpose() + DMatrix::identity(m, m) * 1e-6);
            }
            eskf::update(&current, &z).map_err(|e| format!("cycle {cycle}: {e}"))?.state
        };
        let (min_eig, asym) = psd_stats(&next.covariance);
        if min_eig < -1e-10 || asym > 1e-10 {
            return Err(format!("cycle {cycle}: min eigenvalue {min_eig:e}, asymmetry {asym:e}"));
        }
        worst = (worst.0.min(min_eig), worst.1.max(asym));
        filter = Some(next);
    }
    Ok(worst)
}

pub struct NeesResult {
    pub mean: f64,
    pub band: (f64, f64),
    pub dim: usize,
}

/// Monte-Carlo consistency of the constant-velocity filter with pose
/// measurements. Truth is drawn from the same discrete model the filter
/// assumes; the mean NEES at the final step must fall in the two-sided 95%
/// band of χ²(runs·dim)/runs.
pub fn nees(runs: usize, steps: usize, seed: u64) -> NeesResult {
    let model = TargetMotionModel { kind: MotionKind::ConstantVelocity, process_density: 0.5, attitude_density: 1e-4 };
    let initial = InitialUncertainty::default();
    let (sigma_p, sigma_o, dt) = (0.005, 0.5f64.to_radians(), 0.01);
    let n = model.error_dim();
    let f = model.transition(dt);
    let q_chol = model.process_noise(dt).cholesky().expect("process noise is positive definite").l();
    let p0_sd = [initial.position_m, initial.velocity_m_s, initial.attitude_rad];

    let mut total = 0.0;
    for run in 0..runs {
        let mut rng = stream(seed, run as u64);
        let mut p_true = Vector3::new(0.5, 0.0, 0.6);
        let mut v_true = gaussian3(&mut rng, 0.3);
        let mut q_true = random_unit_quaternion(&mut rng);
        let nominal = NominalState {
            position: p_true - gaussian3(&mut rng, p0_sd[0]),
            velocity: v_true - gaussian3(&mut rng, p0_sd[1]),
            acceleration: Vector3::zeros(),
            orientation: q_true.mul(&UnitQuaternion::exp(&gaussian3(&mut rng, p0_sd[2]))),
            stamp: 0.0,
        };
        let mut filter = ErrorFilterState::new(model, nominal, &initial, sigma_p, sigma_o).expect("valid filter");
        for k in 1..=steps {
            let w = &q_chol * DVector::from_fn(n, |_, _| gaussian(&mut rng));
            let x = DVector::from_iterator(6, p_true.iter().chain(v_true.iter()).copied());
            let x = f.view((0, 0), (6, 6)) * x + w.rows(0, 6);
            p_true = Vector3::new(x[0], x[1], x[2]);
            v_true = Vector3::new(x[3], x[4], x[5]);
            q_true = q_true.mul(&UnitQuaternion::exp(&w.fixed_rows::<3>(6).into_owned()));
            let z = Measurement {
                position: p_true + gaussian3(&mut rng, sigma_p),
                orientation: Some(q_true.mul(&UnitQuaternion::exp(&gaussian3(&mut rng, sigma_o)))),
                stamp: k as f64 * dt,
                r_override: None,
            };
            filter = eskf::update(&filter, &z).expect("update succeeds").state;
        }
        let mut e = DVector::zeros(n);
        e.fixed_rows_mut::<3>(0).copy_from(&(p_true - filter.nominal.position));
        e.fixed_rows_mut::<3>(3).copy_from(&(v_true - filter.nominal.velocity));
        e.fixed_rows_mut::<3>(6).copy_from(&filter.nominal.orientation.inverse().mul(&q_true).log());
        let p_inv_e = filter.covariance.clone().cholesky().expect("covariance is positive definite").solve(&e);
        total += e.dot(&p_inv_e);
    }
    let chi = ChiSquared::new((runs * n) as f64).expect("positive dof");
    let band = (chi.inverse_cdf(0.025) / runs as f64, chi.inverse_cdf(0.975) / runs as f64);
    NeesResult { mean: total / runs as f64, band, dim: n }
}

fn random_joints(model: &ArmModel, rng: &mut SimRng) -> Joints {
    Joints::from_fn(|i, _| rng.random_range(model.q_min_rad[i]..model.q_max_rad[i]))
}

fn random_base(rng: &mut SimRng) -> Pose6 {
    let rpy = gaussian3(rng, 0.1);
    Pose6::new(gaussian3(rng, 0.2), UnitQuaternion::exp(&rpy))
}

/// Largest entry-wise gap between the geometric Jacobian and central finite
/// differences of forward kinematics, over random configurations and bases.
pub fn jacobian_fd_gap(configs: usize, seed: u64) -> f64 {
    let model = ArmModel::default();
    let mut rng = stream(seed, 1);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let q = random_joints(&model, &mut rng);
        let base = random_base(&mut rng);
        let j = geometric_jacobian(&model, &q, &base);
        for i in 0..7 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let (fp, fm) = (forward_kinematics(&model, &qp, &base), forward_kinematics(&model, &qm, &base));
            let lin = (fp.position - fm.position) / (2.0 * h);
            // world-frame angular rate: log(R(q+h)·R(q−h)ᵀ) / 2h
            let ang = fp.orientation.mul(&fm.orientation.inverse()).log() / (2.0 * h);
            for r in 0..3 {
                worst = worst.max((j[(r, i)] - lin[r]).abs()).max((j[(r + 3, i)] - ang[r]).abs());
            }
        }
    }
    worst
}

/// Largest relative gap between repeated discrete steps under constant
/// control and the closed form `q₀ + q̇₀t + ½ut²`, `q̇₀ + ut`.
pub fn discrete_model_gap(samples: usize, steps: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let dt = rng.random_range(0.01..0.1);
        let model = build_discrete_model(dt).expect("positive step");
        let z0 = JointState {
            q: Joints::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            q_dot: Joints::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            stamp: 0.0,
        };
        let u = Joints::from_fn(|_, _| rng.random_range(-20.0..20.0));
        let mut z = z0;
        for k in 1..=steps {
            z = model.step(&z, &u);
            let t = k as f64 * dt;
            let q = z0.q + z0.q_dot * t + u * (0.5 * t * t);
            let qd = z0.q_dot + u * t;
            for i in 0..7 {
                worst = worst.max((z.q[i] - q[i]).abs() / q[i].abs().max(1.0));
                worst = worst.max((z.q_dot[i] - qd[i]).abs() / qd[i].abs().max(1.0));
            }
        }
    }
    worst
}

/// Circular-target campaign template under `roll_deg` of roll.
pub fn circular_template(roll_deg: f64) -> Scenario {
    let mut s = Scenario::default();
    s.sea_state.roll_amplitude = roll_deg.to_radians();
    s
}

pub fn campaign(template: Scenario, n_trials: usize, controllers: Vec<ControllerKind>, threads: Option<usize>) -> CampaignSpec {
    CampaignSpec {
        template,
        n_trials,
        controllers,
        master_seed: 7,
        roll_amplitude_range: None,
        target_speeds_m_s: Vec::new(),
        threads,
    }
}

/// JSONL of every trial plus the campaign CSV, as produced for the log files.
pub fn campaign_bytes(spec: &CampaignSpec) -> Vec<u8> {
    let out = run_campaign(spec).expect("campaign runs");
    let mut bytes = Vec::new();
    for (_, _, record) in &out.trials {
        bytes.extend_from_slice(trial_jsonl(record).as_bytes());
    }
    bytes.extend_from_slice(campaign_csv(&out.report).as_bytes());
    bytes
}

/// Serial vs parallel logs for the same campaign; `Err` names the first
/// differing byte.
pub fn determinism(n_trials: usize, threads: usize) -> Result<usize, String> {
    let mut template = circular_template(5.0);
    template.record_timing = false;
    template.target = TargetMotion::default_circular();
    let controllers = vec![ControllerKind::ShrinkingHorizon, ControllerKind::SimpleFollowing];
    let serial = campaign_bytes(&campaign(template.clone(), n_trials, controllers.clone(), Some(1)));
    let again = campaign_bytes(&campaign(template.clone(), n_trials, controllers.clone(), Some(1)));
    let parallel = campaign_bytes(&campaign(template, n_trials, controllers, Some(threads)));
    for (name, other) in [("repeat", &again), ("parallel", &parallel)] {
        if serial != *other {
            let at = serial.iter().zip(other.iter()).position(|(a, b)| a != b).unwrap_or(serial.len().min(other.len()));
            return Err(format!("{name} run differs from the serial run at byte {at}"));
        }
    }
    Ok(serial.len())
}

/// Shrinking-horizon successes at 1 m/s for each roll amplitude.
pub fn roll_sweep(rolls_deg: &[f64], n_trials: usize) -> Vec<(f64, usize)> {
    rolls_deg
        .iter()
        .map(|&roll| {
            let mut template = circular_template(roll);
            if let TargetMotion::Circular { speed_m_s, .. } = &mut template.target {
                *speed_m_s = 1.0;
            }
            let out = run_campaign(&campaign(template, n_trials, vec![ControllerKind::ShrinkingHorizon], None))
                .expect("campaign runs");
            (roll, out.report.controllers[0].successes)
        })
        .collect()
}

/// Non-increasing up to one trial of slack between any two sweep points.
pub fn monotone_within_one(sweep: &[(f64, usize)]) -> bool {
    sweep.iter().enumerate().all(|(i, (_, a))| sweep[i + 1..].iter().all(|(_, b)| *b <= a + 1))
}
