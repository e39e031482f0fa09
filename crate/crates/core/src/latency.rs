//! Solver latency measurement on seeded random interception instances.

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::arm::{forward_kinematics, ArmModel, JointState, Joints, DOF};
use crate::control::{solve_horizon, CostWeights, PlannerSettings, MAX_HORIZON};
use crate::error::{Error, Result};
use crate::frames::Pose6;
use crate::harness::{quantile, ControllerSettings};
use crate::rng::{derive_seed, unit_from};
use crate::wave::{base_transform, SeaStateConfig};

/// One cold planning problem: arm state, target and deck trajectories.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub z0: JointState,
    pub target_traj: Vec<Pose6>,
    pub base_traj: Vec<Pose6>,
    pub horizon: usize,
}

/// Random instance `index` of `seed`: the arm near home with some joint
/// velocity, a target 5 to 20 cm from the end effector moving at up to
/// 1 m/s, and a ±5° deck.
pub fn bench_instance(model: &ArmModel, seed: u64, index: u64, horizon: usize, dt: f64) -> BenchInstance {
    let s = derive_seed(seed, index);
    let mut draw = {
        let mut c = 0u64;
        move || {
            c += 1;
            2.0 * unit_from(s, c) - 1.0
        }
    };
    let mut q = model.home();
    let mut q_dot = Joints::zeros();
    for i in 0..DOF {
        q[i] = (q[i] + 0.2 * draw()).clamp(model.q_min_rad[i] + 0.1, model.q_max_rad[i] - 0.1);
        q_dot[i] = 0.3 * draw();
    }
    let sea = SeaStateConfig { seed: s, ..SeaStateConfig::default() }.resolve();
    let base_traj: Vec<Pose6> = (0..=horizon).map(|k| base_transform(&sea.pose_at(k as f64 * dt))).collect();
    let home = forward_kinematics(model, &model.home(), &base_traj[0]);

    let unit = |v: Vector3<f64>| if v.norm() > 1e-9 { v.normalize() } else { Vector3::x() };
    let offset = unit(Vector3::new(draw(), draw(), draw())) * (0.05 + 0.075 * (draw() + 1.0));
    let velocity = unit(Vector3::new(draw(), draw(), draw())) * (0.5 * (draw() + 1.0));
    let start = home.position + offset;
    let target_traj = (0..=horizon)
        .map(|k| Pose6::new(start + velocity * (k as f64 * dt), home.orientation))
        .collect();
    BenchInstance { z0: JointState { q, q_dot, stamp: 0.0 }, target_traj, base_traj, horizon }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub horizon: usize,
    pub samples: usize,
    pub median_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
    pub mean_passes: f64,
    pub feasible_fraction: f64,
}

/// Times cold `solve_horizon` calls with the default controller weights at a
/// 5° severity; `repeats` instances per horizon.
pub fn run_bench(horizons: &[usize], repeats: usize, dt: f64, seed: u64) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::Config("bench repeats must be at least 1".into()));
    }
    if let Some(&h) = horizons.iter().find(|&&h| !(1..=MAX_HORIZON).contains(&h)) {
        return Err(Error::Config(format!("bench horizon {h} outside 1..={MAX_HORIZON}")));
    }
    let model = ArmModel::default();
    let controller = ControllerSettings::default();
    let weights: CostWeights = controller.adapted_weights(5f64.to_radians(), &model.home());
    let settings = PlannerSettings { dt, max_passes: controller.max_relinearizations, ..PlannerSettings::default() };
    horizons
        .iter()
        .map(|&h| {
            let mut times = Vec::with_capacity(repeats);
            let (mut passes, mut feasible) = (0usize, 0usize);
            for i in 0..repeats {
                let inst = bench_instance(&model, seed, (h * 100_003 + i) as u64, h, dt);
                let start = Instant::now();
                let plan = solve_horizon(&inst.z0, &inst.target_traj, &inst.base_traj, &model, &weights, h, None, &settings)?;
                times.push(start.elapsed().as_secs_f64());
                passes += plan.passes;
                feasible += plan.feasible as usize;
            }
            let q = |p| quantile(&times, p).expect("non-empty sample");
            Ok(BenchRow {
                horizon: h,
                samples: repeats,
                median_s: q(0.5),
                p95_s: q(0.95),
                max_s: q(1.0),
                mean_passes: passes as f64 / repeats as f64,
                feasible_fraction: feasible as f64 / repeats as f64,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("horizon,samples,median_s,p95_s,max_s,mean_passes,feasible_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.horizon, r.samples, r.median_s, r.p95_s, r.max_s, r.mean_passes, r.feasible_fraction
        ));
    }
    out
}
