//! Deliberately plain numerics: row-major `Vec<Vec<f64>>` matrices, fixed
//! arrays for 3-vectors and quaternions, textbook loops throughout.

pub type Mat = Vec<Vec<f64>>;
pub type V3 = [f64; 3];
pub type M3 = [[f64; 3]; 3];
/// Hamilton quaternion `[w, x, y, z]`.
pub type Quat = [f64; 4];

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i][l] * b[l][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Mat = a.iter().zip(b).map(|(row, v)| row.iter().copied().chain([*v]).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for row in col + 1..n {
            let f = m[row][col] / p;
            if f != 0.0 {
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for k in i + 1..n {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    x
}

pub fn m3_to_mat(m: &M3) -> Mat {
    m.iter().map(|r| r.to_vec()).collect()
}

pub fn mat_to_m3(m: &Mat) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[i][j];
        }
    }
    out
}

pub fn m3_mul(a: &M3, b: &M3) -> M3 {
    mat_to_m3(&matmul(&m3_to_mat(a), &m3_to_mat(b)))
}

pub fn m3_vec(a: &M3, v: &V3) -> V3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += a[i][j] * v[j];
        }
    }
    out
}

pub fn m3_transpose(a: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn rot_x(a: f64) -> M3 {
    let (s, c) = (a.sin(), a.cos());
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rot_y(a: f64) -> M3 {
    let (s, c) = (a.sin(), a.cos());
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_z(a: f64) -> M3 {
    let (s, c) = (a.sin(), a.cos());
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Z-Y-X composition `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn rpy(roll: f64, pitch: f64, yaw: f64) -> M3 {
    m3_mul(&m3_mul(&rot_z(yaw), &rot_y(pitch)), &rot_x(roll))
}

pub fn v_add(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn v_sub(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn v_scale(a: &V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn v_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn cross(a: &V3, b: &V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn q_mul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn q_conj(q: &Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

pub fn q_axis_angle(axis: &V3, angle: f64) -> Quat {
    let n = v_norm(axis);
    let (s, c) = ((0.5 * angle).sin(), (0.5 * angle).cos());
    [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n]
}

pub fn q_normalize(q: &Quat) -> Quat {
    let n = v_norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Rotation vector of `q`, taking the short way round.
pub fn q_log(q: &Quat) -> V3 {
    let q = if q[0] < 0.0 { [-q[0], -q[1], -q[2], -q[3]] } else { *q };
    let s = v_norm(&q[1..]);
    if s < 1e-300 {
        return [0.0; 3];
    }
    let angle = 2.0 * s.atan2(q[0]);
    [q[1] / s * angle, q[2] / s * angle, q[3] / s * angle]
}

pub fn q_to_m3(q: &Quat) -> M3 {
    let [w, x, y, z] = *q;
    [
        [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ]
}

/// Rotation vector of a rotation matrix via the axis-angle formula.
pub fn m3_log(r: &M3) -> V3 {
    let trace = r[0][0] + r[1][1] + r[2][2];
    let angle = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let w = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    if angle < 1e-12 {
        return v_scale(&w, 0.5);
    }
    v_scale(&w, angle / (2.0 * angle.sin()))
}

/// Deterministic uniform stream for generating inputs.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    /// Knuth's MMIX constants; top 53 bits to `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn symmetric(&mut self, half: f64) -> f64 {
        half * (2.0 * self.uniform() - 1.0)
    }
}

/// Homogeneous 4×4 transform helpers for the DH chain.
pub fn h_rot_x(a: f64) -> Mat {
    let (s, c) = (a.sin(), a.cos());
    vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, c, -s, 0.0], vec![0.0, s, c, 0.0], vec![0.0, 0.0, 0.0, 1.0]]
}

pub fn h_rot_z(a: f64) -> Mat {
    let (s, c) = (a.sin(), a.cos());
    vec![vec![c, -s, 0.0, 0.0], vec![s, c, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]
}

pub fn h_trans(x: f64, y: f64, z: f64) -> Mat {
    vec![vec![1.0, 0.0, 0.0, x], vec![0.0, 1.0, 0.0, y], vec![0.0, 0.0, 1.0, z], vec![0.0, 0.0, 0.0, 1.0]]
}

pub fn h_from(r: &M3, p: &V3) -> Mat {
    let mut m = eye(4);
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j];
        }
        m[i][3] = p[i];
    }
    m
}

pub fn h_parts(m: &Mat) -> (M3, V3) {
    (mat_to_m3(m), [m[0][3], m[1][3], m[2][3]])
}
