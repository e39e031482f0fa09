//! Reference dynamics: a quadrotor written from the rigid-body equations, an
//! adaptive Dormand–Prince integrator, a direct DH chain product and a
//! quadrature-based noise discretization.

use crate::naive::*;

#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub mass: f64,
    pub arm: f64,
    pub inertia: V3,
    pub gravity: f64,
    pub drag: f64,
    pub max_thrust: f64,
}

impl Quad {
    pub fn reference() -> Self {
        Self { mass: 1.5, arm: 0.25, inertia: [0.02, 0.02, 0.04], gravity: 9.81, drag: 0.016, max_thrust: 9.0 }
    }
}

/// State layout: position 0..3, velocity 3..6, quaternion 6..10, body rates 10..13.
pub type QuadState = [f64; 13];

pub fn quad_rest(p: V3) -> QuadState {
    let mut x = [0.0; 13];
    x[..3].copy_from_slice(&p);
    x[6] = 1.0;
    x
}

pub fn quad_derivative(x: &[f64], f: &[f64; 4], c: &Quad) -> Vec<f64> {
    let q = q_normalize(&[x[6], x[7], x[8], x[9]]);
    let r = q_to_m3(&q);
    let total: f64 = f.iter().sum();
    let thrust = m3_vec(&r, &[0.0, 0.0, total]);
    let w = [x[10], x[11], x[12]];
    let moments = [c.arm * (f[1] - f[3]), c.arm * (f[0] - f[2]), c.drag * (f[0] - f[1] + f[2] - f[3])];
    let jw = [c.inertia[0] * w[0], c.inertia[1] * w[1], c.inertia[2] * w[2]];
    let gyro = cross(&w, &jw);
    let qd = q_mul(&q, &[0.0, w[0], w[1], w[2]]);
    let mut d = vec![0.0; 13];
    for i in 0..3 {
        d[i] = x[3 + i];
        d[3 + i] = thrust[i] / c.mass - if i == 2 { c.gravity } else { 0.0 };
        d[10 + i] = (moments[i] - gyro[i]) / c.inertia[i];
    }
    for i in 0..4 {
        d[6 + i] = 0.5 * qd[i];
    }
    d
}

/// Adaptive Dormand–Prince 5(4) from `t0` to `t1`.
pub fn dopri<F: Fn(f64, &[f64]) -> Vec<f64>>(f: F, y0: &[f64], t0: f64, t1: f64, tol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = (t1 - t0) / 16.0;
    while t1 - t > 1e-15 {
        h = h.min(t1 - t);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<f64> = (0..n).map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
            k.push(f(t + C[s] * h, &ys));
        }
        let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>()).collect();
        let err = (0..n)
            .map(|i| {
                let e = h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
                (e / (tol * (1.0 + y[i].abs().max(y5[i].abs())))).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let err = err.sqrt();
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

pub fn quad_flow(x: &QuadState, f: &[f64; 4], c: &Quad, duration: f64) -> QuadState {
    let y = dopri(|_, s| quad_derivative(s, f, c), x, 0.0, duration, 1e-12);
    let mut out = [0.0; 13];
    out.copy_from_slice(&y);
    let q = q_normalize(&[y[6], y[7], y[8], y[9]]);
    let s = if q[0] < 0.0 { -1.0 } else { 1.0 };
    for i in 0..4 {
        out[6 + i] = s * q[i];
    }
    out
}

/// Roll, pitch, yaw read off the rotation matrix.
pub fn rpy_of(q: &Quat) -> V3 {
    let r = q_to_m3(&q_normalize(q));
    [r[2][1].atan2(r[2][2]), (-r[2][0]).clamp(-1.0, 1.0).asin(), r[1][0].atan2(r[0][0])]
}

#[derive(Debug, Clone, Copy)]
pub struct PdLoop {
    pub kp: V3,
    pub kd: V3,
    pub att_kp: V3,
    pub att_kd: V3,
    pub tau: f64,
    pub max_tilt: f64,
}

impl PdLoop {
    pub fn reference() -> Self {
        Self { kp: [1.6, 1.6, 4.0], kd: [2.2, 2.2, 3.0], att_kp: [60.0, 60.0, 10.0], att_kd: [14.0, 14.0, 5.0], tau: 0.05, max_tilt: 0.35 }
    }
}

/// Error memory: previous error and filtered rate.
#[derive(Debug, Clone, Copy, Default)]
pub struct PdMem {
    pub prev: Option<V3>,
    pub rate: V3,
}

/// Outer PD on position with a filtered error rate, small-angle tilt
/// inversion, inner PD on attitude, and a rotor mix solved as a 4×4 system.
pub fn pd_command(x: &QuadState, reference: &V3, c: &Quad, g: &PdLoop, mem: &PdMem, dt: f64) -> ([f64; 4], PdMem) {
    let p = [x[0], x[1], x[2]];
    let err = v_sub(reference, &p);
    let rate = match mem.prev {
        None => [-x[3], -x[4], -x[5]],
        Some(prev) => {
            let raw = v_scale(&v_sub(&err, &prev), 1.0 / dt);
            let alpha = dt / (g.tau + dt);
            v_add(&mem.rate, &v_scale(&v_sub(&raw, &mem.rate), alpha))
        }
    };
    let u: V3 = std::array::from_fn(|i| g.kp[i] * err[i] + g.kd[i] * rate[i]);
    let [roll, pitch, yaw] = rpy_of(&[x[6], x[7], x[8], x[9]]);
    let (s, co) = yaw.sin_cos();
    let pitch_d = ((u[0] * co + u[1] * s) / c.gravity).clamp(-g.max_tilt, g.max_tilt);
    let roll_d = ((u[0] * s - u[1] * co) / c.gravity).clamp(-g.max_tilt, g.max_tilt);
    let thrust = c.mass * (c.gravity + u[2]) / (roll.cos() * pitch.cos()).max(0.5);
    let yaw_err = (0.0 - yaw + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    let att_err = [roll_d - roll, pitch_d - pitch, yaw_err];
    let m: V3 = std::array::from_fn(|i| c.inertia[i] * (g.att_kp[i] * att_err[i] - g.att_kd[i] * x[10 + i]));
    let (l, cd) = (c.arm, c.drag);
    let mix = vec![
        vec![1.0, 1.0, 1.0, 1.0],
        vec![0.0, l, 0.0, -l],
        vec![l, 0.0, -l, 0.0],
        vec![cd, -cd, cd, -cd],
    ];
    let f = solve(&mix, &[thrust, m[0], m[1], m[2]]);
    let cmd = std::array::from_fn(|i| f[i].clamp(0.0, c.max_thrust));
    (cmd, PdMem { prev: Some(err), rate })
}

/// Modified DH row `(a, alpha, d, theta_offset)`.
pub type Dh = [f64; 4];

pub fn reference_arm() -> [Dh; 7] {
    let h = std::f64::consts::FRAC_PI_2;
    [
        [0.0, 0.0, 0.34, 0.0],
        [0.0, -h, 0.0, 0.0],
        [0.0, h, 0.40, 0.0],
        [0.0, h, 0.0, 0.0],
        [0.0, -h, 0.40, 0.0],
        [0.0, -h, 0.0, 0.0],
        [0.0, h, 0.126, 0.0],
    ]
}

/// Homogeneous transforms after each joint, starting from `base`.
pub fn dh_chain(links: &[Dh], q: &[f64], base: &Mat) -> Vec<Mat> {
    let mut t = base.clone();
    links
        .iter()
        .zip(q)
        .map(|(l, qi)| {
            let step = matmul(&matmul(&matmul(&h_rot_x(l[1]), &h_trans(l[0], 0.0, 0.0)), &h_rot_z(qi + l[3])), &h_trans(0.0, 0.0, l[2]));
            t = matmul(&t, &step);
            t.clone()
        })
        .collect()
}

/// `(rotation, position)` of the flange.
pub fn dh_fk(links: &[Dh], q: &[f64], base: &Mat) -> (M3, V3) {
    h_parts(dh_chain(links, q, base).last().expect("non-empty chain"))
}

/// Kinematic chain of `order` derivatives per axis followed by a three-axis
/// attitude random walk: `(F, Q)` over `dt`, with `F = exp(A dt)` summed as a
/// series and `Q = ∫ F(s) G Qc Gᵀ F(s)ᵀ ds` by five-point Gauss–Legendre.
pub fn discretize(order: usize, density: f64, attitude_density: f64, dt: f64) -> (Mat, Mat) {
    let n = 3 * order + 3;
    let mut a = zeros(n, n);
    for blk in 0..order - 1 {
        for k in 0..3 {
            a[3 * blk + k][3 * (blk + 1) + k] = 1.0;
        }
    }
    let expm = |s: f64| {
        let mut out = eye(n);
        let mut term = eye(n);
        for j in 1..=order {
            term = matmul(&term, &a);
            let c = s.powi(j as i32) / (1..=j).product::<usize>() as f64;
            out = add(&out, &term.iter().map(|r| r.iter().map(|v| v * c).collect()).collect());
        }
        out
    };
    let mut gqg = zeros(n, n);
    for k in 0..3 {
        gqg[3 * (order - 1) + k][3 * (order - 1) + k] = density;
        gqg[3 * order + k][3 * order + k] = attitude_density;
    }
    let nodes = [
        (0.0, 128.0 / 225.0),
        (-(5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 + 13.0 * 70f64.sqrt()) / 900.0),
        ((5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 + 13.0 * 70f64.sqrt()) / 900.0),
        (-(5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
        ((5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
    ];
    let mut q = zeros(n, n);
    for (x, w) in nodes {
        let s = 0.5 * dt * (x + 1.0);
        let f = expm(s);
        let term = matmul(&matmul(&f, &gqg), &transpose(&f));
        for i in 0..n {
            for j in 0..n {
                q[i][j] += 0.5 * dt * w * term[i][j];
            }
        }
    }
    (expm(dt), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_integrates_an_exponential() {
        let y = dopri(|_, y| vec![-y[0]], &[1.0], 0.0, 2.0, 1e-12);
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn hover_mix_is_equal_thrusts() {
        let c = Quad::reference();
        let x = quad_rest([0.0, 0.0, 2.0]);
        let (f, _) = pd_command(&x, &[0.0, 0.0, 2.0], &c, &PdLoop::reference(), &PdMem::default(), 0.005);
        assert!(f.iter().all(|v| (v - c.mass * c.gravity / 4.0).abs() < 1e-12));
    }

    #[test]
    fn random_walk_variance_is_linear() {
        let (_, q) = discretize(2, 0.0, 0.3, 0.1);
        assert!((q[6][6] - 0.03).abs() < 1e-15);
    }
}
