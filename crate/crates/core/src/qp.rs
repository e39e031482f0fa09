//! Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
//!
//! ```text
//!     minimize    ½ xᵀ G x + aᵀ x
//!     subject to  C x ≥ b
//! ```
//!
//! `G` must be symmetric positive definite. The method starts from the
//! unconstrained minimum and adds the most violated constraint each outer
//! iteration, dropping constraints whose multipliers would turn negative.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    /// One constraint per row.
    pub constraints: DMatrix<f64>,
    pub bounds: DVector<f64>,
}

impl QpProblem {
    pub fn unconstrained(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self { hessian, linear, constraints: DMatrix::zeros(0, n), bounds: DVector::zeros(0) }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.bounds.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// A constraint counts as violated when `c·x - b < -feasibility_tol`.
    pub feasibility_tol: f64,
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { feasibility_tol: 1e-10, max_iterations: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Active constraint indices with their (nonnegative) multipliers.
    pub active: Vec<(usize, f64)>,
    pub iterations: usize,
}

impl QpSolution {
    /// Full multiplier vector, zero for inactive constraints.
    pub fn multipliers(&self, m: usize) -> DVector<f64> {
        let mut u = DVector::zeros(m);
        for &(i, v) in &self.active {
            u[i] = v;
        }
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

/// Optimality residuals of a primal-dual pair, computed from the problem data only.
pub fn kkt_residuals(problem: &QpProblem, x: &DVector<f64>, multipliers: &DVector<f64>) -> KktResiduals {
    let grad = &problem.hessian * x + &problem.linear - problem.constraints.transpose() * multipliers;
    let slack = &problem.constraints * x - &problem.bounds;
    let primal = slack.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
    let dual = multipliers.iter().map(|u| (-u).max(0.0)).fold(0.0, f64::max);
    let complementarity = slack.iter().zip(multipliers.iter()).map(|(s, u)| (s * u).abs()).fold(0.0, f64::max);
    KktResiduals { stationarity: grad.amax(), primal, dual, complementarity }
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / r, b / r, r)
    }
}

fn rotate_columns(j: &mut DMatrix<f64>, c0: usize, c1: usize, c: f64, s: f64) {
    let n = j.nrows();
    for r in 0..n {
        let (x, y) = (j[(r, c0)], j[(r, c1)]);
        j[(r, c0)] = c * x + s * y;
        j[(r, c1)] = -s * x + c * y;
    }
}

struct Factor {
    /// `L^{-T} Q`; the first `q` columns span the active normals.
    j: DMatrix<f64>,
    /// Upper triangle: `R = (Jᵀ N)[..q, ..q]`.
    r: DMatrix<f64>,
    q: usize,
}

impl Factor {
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let n = self.j.nrows();
        let q = self.q;
        for k in (q + 1..n).rev() {
            let (c, s, h) = givens(d[k - 1], d[k]);
            if s == 0.0 {
                continue;
            }
            d[k - 1] = h;
            d[k] = 0.0;
            rotate_columns(&mut self.j, k - 1, k, c, s);
        }
        if d[q] == 0.0 {
            return false;
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
        true
    }

    fn drop(&mut self, l: usize) {
        let q = self.q;
        for col in l..q - 1 {
            for row in 0..=col + 1 {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for k in l..q - 1 {
            let (c, s, h) = givens(self.r[(k, k)], self.r[(k + 1, k)]);
            self.r[(k, k)] = h;
            self.r[(k + 1, k)] = 0.0;
            for col in k + 1..q - 1 {
                let (x, y) = (self.r[(k, col)], self.r[(k + 1, col)]);
                self.r[(k, col)] = c * x + s * y;
                self.r[(k + 1, col)] = -s * x + c * y;
            }
            rotate_columns(&mut self.j, k, k + 1, c, s);
        }
        self.q -= 1;
    }

    /// `R⁻¹ d[..q]` by back substitution.
    fn dual_step(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.q;
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        r
    }
}

pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    solve_qp_hinted(problem, settings, &[])
}

/// Like [`solve_qp`], but constraints listed in `hint` (typically the previous
/// active set) are added first while any of them is violated. The optimum is
/// unchanged; only the iteration count depends on the hint.
pub fn solve_qp_hinted(problem: &QpProblem, settings: &QpSettings, hint: &[usize]) -> Result<QpSolution> {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    if problem.hessian.shape() != (n, n) || problem.constraints.shape() != (m, n) {
        return Err(Error::Shape(format!(
            "qp with {n} variables and {m} constraints got hessian {:?}, constraints {:?}",
            problem.hessian.shape(),
            problem.constraints.shape()
        )));
    }
    let chol = problem
        .hessian
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Shape("qp hessian is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Shape("qp hessian factor is singular".into()))?;
    let mut factor = Factor { j: l_inv.transpose(), r: DMatrix::zeros(n, n), q: 0 };

    let mut x = -chol.solve(&problem.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let norms: Vec<f64> = (0..m).map(|i| problem.constraints.row(i).norm().max(1e-300)).collect();
    let mut iterations = 0;

    loop {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Err(Error::Infeasible);
        }
        let slack = &problem.constraints * &x - &problem.bounds;
        let most_violated = |candidates: &mut dyn Iterator<Item = usize>| {
            let mut worst = None;
            let mut worst_val = f64::INFINITY;
            for i in candidates {
                if is_active[i] || slack[i] >= -settings.feasibility_tol {
                    continue;
                }
                let v = slack[i] / norms[i];
                if v < worst_val {
                    worst_val = v;
                    worst = Some(i);
                }
            }
            worst
        };
        let hinted = most_violated(&mut hint.iter().copied().filter(|&i| i < m));
        let Some(p) = hinted.or_else(|| most_violated(&mut (0..m))) else { break };
        let normal: DVector<f64> = problem.constraints.row(p).transpose();
        let mut u_new = 0.0;

        loop {
            iterations += 1;
            if iterations > settings.max_iterations {
                return Err(Error::Infeasible);
            }
            let mut d = factor.j.tr_mul(&normal);
            let q = factor.q;
            let z = factor.j.columns(q, n - q) * d.rows(q, n - q);
            let r = factor.dual_step(&d);

            // partial step: largest dual step that keeps active multipliers >= 0
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 {
                    let t = u[k] / rk;
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(k);
                    }
                }
            }
            let zn = z.dot(&normal);
            // the new normal is independent of the active set iff its component
            // outside their span is nonzero
            let independent = d.rows(q, n - q).norm() > 1e-12 * d.norm();
            let t2 = if independent && zn > 0.0 {
                let s_p = normal.dot(&x) - problem.bounds[p];
                -s_p / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible);
            }
            if t2.is_finite() {
                x += &z * t;
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            u_new += t;

            if t2 <= t1 {
                if !factor.add(&mut d) {
                    return Err(Error::Infeasible);
                }
                active.push(p);
                u.push(u_new);
                is_active[p] = true;
                break;
            }
            let l = drop_at.expect("partial step always names a constraint");
            is_active[active[l]] = false;
            active.remove(l);
            u.remove(l);
            factor.drop(l);
        }
    }

    let objective = problem.objective(&x);
    Ok(QpSolution { x, objective, active: active.into_iter().zip(u.into_iter().map(|v| v.max(0.0))).collect(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn textbook_example() {
        // min ½(x² + y²) + x  s.t. x + 2y >= 1  →  (-0.6, 0.8)
        let p = QpProblem {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::from_vec(vec![1.0, 0.0]),
            constraints: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            bounds: DVector::from_vec(vec![1.0]),
        };
        let s = solve_qp(&p, &QpSettings::default()).unwrap();
        assert_abs_diff_eq!(s.x[0], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.8, epsilon = 1e-12);
        let k = kkt_residuals(&p, &s.x, &s.multipliers(1));
        assert!(k.max() < 1e-12);
    }

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem::unconstrained(DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]), DVector::from_vec(vec![1.0, 2.0]));
        let s = solve_qp(&p, &QpSettings::default()).unwrap();
        let g = &p.hessian * &s.x + &p.linear;
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn infeasible_box_is_reported() {
        // x >= 1 and -x >= 0
        let p = QpProblem {
            hessian: DMatrix::identity(1, 1),
            linear: DVector::zeros(1),
            constraints: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            bounds: DVector::from_vec(vec![1.0, 0.0]),
        };
        assert!(matches!(solve_qp(&p, &QpSettings::default()), Err(Error::Infeasible)));
    }

    /// Box-constrained separable QP has the closed-form clamp solution.
    #[test]
    fn separable_box_matches_clamp() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        let n = 12;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut c = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            c[(2 * i, i)] = 1.0;
            b[2 * i] = -1.0;
            c[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -1.0;
        }
        let p = QpProblem { hessian: DMatrix::from_diagonal(&DVector::from_vec(diag.clone())), linear: DVector::from_vec(a.clone()), constraints: c, bounds: b };
        let s = solve_qp(&p, &QpSettings::default()).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(s.x[i], (-a[i] / diag[i]).clamp(-1.0, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn random_dense_problems_satisfy_kkt() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(42);
        for trial in 0..50 {
            let n = 5 + trial % 20;
            let m = 3 * n;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let hessian = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let linear = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let constraints = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            // feasible by construction: x = 0 satisfies all rows
            let bounds = DVector::from_fn(m, |_, _| rng.random_range(-1.0..0.0));
            let p = QpProblem { hessian, linear, constraints, bounds };
            let s = solve_qp(&p, &QpSettings::default()).unwrap();
            let k = kkt_residuals(&p, &s.x, &s.multipliers(m));
            assert!(k.max() < 1e-8, "trial {trial}: {k:?}");
        }
    }

    #[test]
    fn hint_does_not_change_optimum() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(7);
        let n = 10;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let p = QpProblem {
            hessian: &a * a.transpose() + DMatrix::identity(n, n),
            linear: DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0)),
            constraints: DMatrix::from_fn(30, n, |_, _| rng.random_range(-1.0..1.0)),
            bounds: DVector::from_fn(30, |_, _| rng.random_range(-1.0..0.0)),
        };
        let cold = solve_qp(&p, &QpSettings::default()).unwrap();
        let hint: Vec<usize> = cold.active.iter().map(|a| a.0).collect();
        let warm = solve_qp_hinted(&p, &QpSettings::default(), &hint).unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-10);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn degenerate_duplicate_constraints() {
        let p = QpProblem {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::from_vec(vec![-2.0, -2.0]),
            constraints: DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, -1.0, 0.0, -2.0, 0.0]),
            bounds: DVector::from_vec(vec![-1.0, -1.0, -2.0]),
        };
        let s = solve_qp(&p, &QpSettings::default()).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 2.0, epsilon = 1e-12);
    }
}
