use super::{ButcherTableau, DaeSystem, SolverConfig, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::model::{solve_algebraic, CONSISTENT_INIT_TOL};
use crate::numerics::{newton_solve, Matrix, NewtonOptions};

/// Result of one IRK step: the new consistent state and the converged
/// stage values `(α_j, β_j)`.
#[derive(Clone, Debug)]
pub struct IrkStep {
    pub xd: Vec<f64>,
    pub xa: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub newton_iterations: usize,
}

/// One step of size `config.delta` with the input held at `u`.
pub fn irk_step<S: DaeSystem + ?Sized>(
    system: &S,
    xd: &[f64],
    xa: &[f64],
    u: &[f64],
    tableau: &ButcherTableau,
    config: &SolverConfig,
) -> Result<IrkStep> {
    config.validate()?;
    check_len("u", u.len(), system.n_input())?;
    irk_step_at(system, 0.0, xd, xa, &|_| u.to_vec(), config.delta, tableau, config)
}

/// One step of size `h` from time `t`. Stage `j` sees the input at
/// `t + h·Σ_k b[j][k]`.
///
/// The stacked unknown `[α_1..α_ν, β_1..β_ν]` is solved by a single Newton
/// iteration warm-started at `(x_d, x_a)`; a singular stage Jacobian is
/// reported as [`Error::IndexViolation`].
#[allow(clippy::too_many_arguments)]
pub fn irk_step_at<S: DaeSystem + ?Sized>(
    system: &S,
    t: f64,
    xd: &[f64],
    xa: &[f64],
    input: &dyn Fn(f64) -> Vec<f64>,
    h: f64,
    tableau: &ButcherTableau,
    config: &SolverConfig,
) -> Result<IrkStep> {
    let nd = system.n_dyn();
    let na = system.n_alg();
    let nu = tableau.nu;
    check_len("x_d", xd.len(), nd)?;
    check_len("x_a", xa.len(), na)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let inputs: Vec<Vec<f64>> = tableau
        .row_sums()
        .iter()
        .map(|r| input(t + h * r))
        .collect();
    for u in &inputs {
        check_len("u", u.len(), system.n_input())?;
    }

    let n_alpha = nu * nd;
    let dim = nu * (nd + na);
    let split = |z: &[f64], j: usize| -> (Vec<f64>, Vec<f64>) {
        (
            z[j * nd..(j + 1) * nd].to_vec(),
            z[n_alpha + j * na..n_alpha + (j + 1) * na].to_vec(),
        )
    };

    let residual = |z: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; dim];
        let stages: Vec<_> = (0..nu).map(|j| split(z, j)).collect();
        let rhs: Vec<Vec<f64>> = stages
            .iter()
            .zip(&inputs)
            .map(|((a, b), u)| system.dynamic_rhs(a, b, u))
            .collect();
        for j in 0..nu {
            let rj = &mut r[j * nd..(j + 1) * nd];
            for k in 0..nd {
                rj[k] = stages[j].0[k] - xd[k];
            }
            for (i, fi) in rhs.iter().enumerate() {
                let w = h * tableau.b[(j, i)];
                for k in 0..nd {
                    rj[k] -= w * fi[k];
                }
            }
            let g = system.algebraic_residual(&stages[j].0, &stages[j].1);
            r[n_alpha + j * na..n_alpha + (j + 1) * na].copy_from_slice(&g);
        }
        r
    };

    let jacobian = |z: &[f64]| -> Matrix {
        let mut jm = Matrix::zeros(dim, dim);
        for i in 0..nu {
            let (a, b) = split(z, i);
            let d = system.jacobians(&a, &b, &inputs[i]);
            for j in 0..nu {
                let w = h * tableau.b[(j, i)];
                for r in 0..nd {
                    for c in 0..nd {
                        let delta = if i == j && r == c { 1.0 } else { 0.0 };
                        jm[(j * nd + r, i * nd + c)] = delta - w * d.fd_xd[(r, c)];
                    }
                    for c in 0..na {
                        jm[(j * nd + r, n_alpha + i * na + c)] = -w * d.fd_xa[(r, c)];
                    }
                }
            }
            for r in 0..na {
                for c in 0..nd {
                    jm[(n_alpha + i * na + r, i * nd + c)] = d.ga_xd[(r, c)];
                }
                for c in 0..na {
                    jm[(n_alpha + i * na + r, n_alpha + i * na + c)] = d.ga_xa[(r, c)];
                }
            }
        }
        jm
    };

    let mut z0 = Vec::with_capacity(dim);
    for _ in 0..nu {
        z0.extend_from_slice(xd);
    }
    for _ in 0..nu {
        z0.extend_from_slice(xa);
    }
    let opts = NewtonOptions {
        min_iter: 1,
        ..NewtonOptions::new(config.newton_tol, config.newton_max_iter)
    };
    let report = newton_solve(&residual, Some(&jacobian), &z0, &opts).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::IndexViolation,
        other => other,
    })?;

    let (alpha, beta): (Vec<_>, Vec<_>) = (0..nu).map(|j| split(&report.x, j)).unzip();
    let mut xd_next = xd.to_vec();
    for j in 0..nu {
        let f = system.dynamic_rhs(&alpha[j], &beta[j], &inputs[j]);
        let w = h * tableau.c[j];
        for k in 0..nd {
            xd_next[k] += w * f[k];
        }
    }
    let xa_next = solve_manifold(system, &xd_next, &beta[nu - 1], config)?;
    Ok(IrkStep {
        xd: xd_next,
        xa: xa_next,
        alpha,
        beta,
        newton_iterations: report.iterations,
    })
}

fn solve_manifold<S: DaeSystem + ?Sized>(
    system: &S,
    xd: &[f64],
    guess: &[f64],
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    if system.n_alg() == 0 {
        return Ok(Vec::new());
    }
    let res = |x: &[f64]| system.algebraic_residual(xd, x);
    let jac = |x: &[f64]| system.algebraic_jacobian_xa(xd, x);
    let opts = NewtonOptions {
        min_iter: 1,
        ..NewtonOptions::new(config.newton_tol, config.newton_max_iter)
    };
    newton_solve(&res, Some(&jac), guess, &opts)
        .map(|r| r.x)
        .map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::IndexViolation,
            other => other,
        })
}

/// Number of steps and the time grid `0, Δ, 2Δ, …, t_end`; the last step is
/// shortened so the grid ends exactly at `t_end`.
pub(crate) fn time_grid(t_end: f64, delta: f64) -> Result<Vec<f64>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be non-negative, got {t_end}")));
    }
    let n = (t_end / delta * (1.0 - 1e-12)).ceil() as usize;
    let mut times: Vec<f64> = (0..n).map(|k| k as f64 * delta).collect();
    times.push(t_end);
    Ok(times)
}

/// Fixed-step march from `x_d0` with `x_a0` from consistent initialization.
/// Failures carry the start time of the failing step.
pub fn simulate<S: DaeSystem + ?Sized>(
    system: &S,
    xd0: &[f64],
    input: &dyn Fn(f64) -> Vec<f64>,
    t_end: f64,
    tableau: &ButcherTableau,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    check_len("x_d0", xd0.len(), system.n_dyn())?;
    let times = time_grid(t_end, config.delta)?;
    let fail = |time: f64| move |e: Error| Error::SolverFailure { time, source: Box::new(e) };

    let xa0 = solve_algebraic(system, xd0, &vec![0.0; system.n_alg()], CONSISTENT_INIT_TOL, 50)
        .map_err(fail(0.0))?;
    let u0 = input(0.0);
    check_len("u", u0.len(), system.n_input())?;

    let mut traj = Trajectory::with_capacity(times.len());
    traj.push(0.0, xd0.to_vec(), xa0, u0);
    for w in times.windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let (xd, xa) = traj.last_state();
        let step = irk_step_at(system, t, xd, xa, input, t_next - t, tableau, config)
            .map_err(fail(t))?;
        traj.push(t_next, step.xd, step.xa, input(t_next));
    }
    Ok(traj)
}
