//! Box-constrained nonlinear least squares: projected Levenberg-Marquardt with
//! Moré column scaling and step rejection.

use crate::error::{Error, Result};
use crate::fitcore::linalg::{norm, Matrix, Qr};

type ResidualFn<'a> = dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a;
type JacobianFn<'a> = dyn Fn(&[f64]) -> Matrix<f64> + Sync + 'a;

pub struct BoxedProblem<'a> {
    residual: Box<ResidualFn<'a>>,
    jacobian: Option<Box<JacobianFn<'a>>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub initial: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub params: Vec<f64>,
    /// Squared residual norm.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl<'a> BoxedProblem<'a> {
    pub fn new(
        residual: impl Fn(&[f64]) -> Vec<f64> + Sync + 'a,
        lower: Vec<f64>,
        upper: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            residual: Box::new(residual),
            jacobian: None,
            lower,
            upper,
            initial,
        };
        p.check_start(&p.initial)?;
        Ok(p)
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[f64]) -> Matrix<f64> + Sync + 'a) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        (self.residual)(x)
    }

    fn check_start(&self, x: &[f64]) -> Result<()> {
        let n = self.lower.len();
        if n == 0 || self.upper.len() != n || x.len() != n {
            return Err(Error::InvalidArgument("bounds and start must share a nonzero length".into()));
        }
        for i in 0..n {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::InvalidArgument(format!("empty bound interval for parameter {i}")));
            }
            if !(x[i] > lo && x[i] < hi) {
                return Err(Error::InvalidArgument(format!(
                    "start {} for parameter {i} is not strictly inside ({lo}, {hi})",
                    x[i]
                )));
            }
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Forward differences with step `1e-6 * max(1, |x|)`, stepping backward at
    /// an upper bound so every evaluation stays feasible.
    fn jacobian(&self, x: &[f64], r: &[f64]) -> Matrix<f64> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let n = x.len();
        let mut jac = Matrix::zeros(r.len(), n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let mut h = 1e-6 * x[j].abs().max(1.0);
            if x[j] + h > self.upper[j] {
                h = -h;
            }
            xp[j] = x[j] + h;
            let rp = (self.residual)(&xp);
            xp[j] = x[j];
            for i in 0..r.len() {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        jac
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Runs the solver from the problem's own initial point.
pub fn solve_boxed(problem: &BoxedProblem<'_>, opts: SolverOptions) -> Result<Solution> {
    solve_from(problem, &problem.initial, opts)
}

/// Runs the solver from `start`, which must lie strictly inside the bounds.
pub fn solve_from(problem: &BoxedProblem<'_>, start: &[f64], opts: SolverOptions) -> Result<Solution> {
    problem.check_start(start)?;
    let n = start.len();
    let mut x = start.to_vec();
    let mut r = problem.residual(&x);
    if !all_finite(&r) {
        return Err(Error::Numerical(format!("residual is not finite at {x:?}")));
    }
    let mut cost = sq(&r);
    let mut lambda: f64 = 1e-3;
    let mut scale = vec![0.0f64; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = problem.jacobian(&x, &r);
        let m = r.len();
        let grad = jac.adjoint_mul_vec(&r);
        // projected gradient: components pushing into an active bound vanish
        let pg = (0..n)
            .map(|j| {
                let g = grad[j];
                let blocked = (x[j] <= problem.lower[j] && g > 0.0) || (x[j] >= problem.upper[j] && g < 0.0);
                if blocked {
                    0.0
                } else {
                    let col = norm(jac.column(j));
                    if col == 0.0 {
                        0.0
                    } else {
                        g.abs() / (col * cost.sqrt())
                    }
                }
            })
            .fold(0.0f64, f64::max);
        if pg <= opts.tol {
            converged = true;
            break;
        }
        for j in 0..n {
            scale[j] = scale[j].max(norm(jac.column(j))).max(1e-300);
        }
        // free variables only; active ones stay pinned this iteration
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                let g = grad[j];
                !((x[j] <= problem.lower[j] && g > 0.0) || (x[j] >= problem.upper[j] && g < 0.0))
            })
            .collect();

        let mut accepted = false;
        for _ in 0..40 {
            let k = free.len();
            let sl = lambda.sqrt();
            let aug = Matrix::from_fn(m + k, k, |i, c| {
                if i < m {
                    jac[(i, free[c])]
                } else if i - m == c {
                    sl * scale[free[c]]
                } else {
                    0.0
                }
            });
            let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            rhs.extend(std::iter::repeat_n(0.0, k));
            let step = Qr::new(&aug).and_then(|qr| qr.solve(&rhs));
            let Ok(step) = step else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = x.clone();
            for (c, &j) in free.iter().enumerate() {
                trial[j] += step.x[c];
            }
            problem.project(&mut trial);
            let rt = problem.residual(&trial);
            let ct = if all_finite(&rt) { sq(&rt) } else { f64::INFINITY };
            if ct < cost {
                let dx: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let xn = norm(&x);
                let rel_drop = (cost - ct) / cost;
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if dx <= opts.tol * (xn + opts.tol) || rel_drop <= opts.tol * opts.tol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // no descent available at machine precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(Solution {
        params: x,
        cost,
        iterations,
        converged,
    })
}

/// Solves from each start and keeps the lowest cost; ties go to the earlier start.
/// Errors only when every start fails.
pub fn multi_start(problem: &BoxedProblem<'_>, starts: &[Vec<f64>], opts: SolverOptions) -> Result<Solution> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("multi_start needs at least one start".into()));
    }
    let mut best: Option<Solution> = None;
    let mut last_err = None;
    for s in starts {
        match solve_from(problem, s, opts) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
                    best = Some(sol);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start was attempted"))
}
