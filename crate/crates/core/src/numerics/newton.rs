//! Newton–Raphson for square nonlinear systems with a halving line search.

use super::lu::LuFactor;
use super::matrix::{norm, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Halve the step while the residual norm increases.
    pub line_search: bool,
    pub max_halvings: usize,
    /// Updates taken even when the starting point already meets `tol`.
    pub min_iter: usize,
    /// Step for the central-difference Jacobian fallback.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            line_search: true,
            max_halvings: 20,
            min_iter: 0,
            fd_step: 1e-6,
        }
    }
}

impl NewtonOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Jacobian callback for [`newton_solve`]. `None` falls back to central differences.
pub type JacobianFn<'a> = &'a dyn Fn(&[f64]) -> Matrix;

/// Solves `residual(x) = 0` from `x0`.
///
/// Converged when `‖residual(x)‖₂ ≤ tol`. Returns `NoConvergence` after
/// `max_iter` Newton updates, and propagates `SingularMatrix` from the
/// inner linear solve.
pub fn newton_solve(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: Option<JacobianFn<'_>>,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "newton_solve needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut r_norm = norm(&r);

    for iter in 0..opts.max_iter {
        if r_norm <= opts.tol && iter >= opts.min_iter {
            return Ok(NewtonReport {
                x,
                iterations: iter,
                residual_norm: r_norm,
            });
        }
        if !r_norm.is_finite() {
            break;
        }
        let jac = match jacobian {
            Some(j) => j(&x),
            None => finite_diff_jacobian(residual, &x, opts.fd_step),
        };
        let step = LuFactor::new(&jac)?.solve(&r)?;

        let mut t = 1.0;
        let mut trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - si).collect();
        let mut trial_r = residual(&trial);
        let mut trial_norm = norm(&trial_r);
        if opts.line_search {
            let mut halvings = 0;
            while !(trial_norm <= r_norm) && halvings < opts.max_halvings {
                t *= 0.5;
                halvings += 1;
                for ((tr, xi), si) in trial.iter_mut().zip(&x).zip(&step) {
                    *tr = xi - t * si;
                }
                trial_r = residual(&trial);
                trial_norm = norm(&trial_r);
            }
        }
        x = trial;
        r = trial_r;
        r_norm = trial_norm;
    }

    if r_norm <= opts.tol {
        return Ok(NewtonReport {
            x,
            iterations: opts.max_iter,
            residual_norm: r_norm,
        });
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: r_norm,
    })
}

/// Central-difference Jacobian: column `j` is `(f(x+h·e_j) − f(x−h·e_j)) / 2h`.
pub fn finite_diff_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Matrix {
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = x.len();
    let mut xp = x.to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let m = cols.first().map_or(0, |c| c.len());
    Matrix::from_fn(m, n, |i, j| cols[j][i])
}
