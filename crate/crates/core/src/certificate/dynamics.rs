use serde::{Deserialize, Serialize};

use crate::dae::{simulate, ButcherTableau, DaeJacobians, DaeSystem, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::model::NdaeModel;
use crate::nn::DnnModel;
use crate::numerics::{is_hurwitz, norm, Matrix};

/// `‖e(t)‖` along a co-simulation, with the states it visited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub times: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub errors: Vec<Vec<f64>>,
    pub states_d: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl ErrorTrace {
    /// Max of `‖e(t)‖` over the final `fraction` of the horizon.
    pub fn tail_max(&self, fraction: f64) -> f64 {
        let Some(&t_end) = self.times.last() else {
            return 0.0;
        };
        let t0 = self.times[0];
        let start = t_end - fraction.clamp(0.0, 1.0) * (t_end - t0);
        self.times
            .iter()
            .zip(&self.error_norms)
            .filter(|(t, _)| **t >= start)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }

    /// Visited `(e, x_d, u)` points, every `stride`-th sample.
    pub fn cloud(&self, stride: usize) -> Vec<CloudPoint> {
        (0..self.times.len())
            .step_by(stride.max(1))
            .map(|i| CloudPoint {
                e: self.errors[i].clone(),
                xd: self.states_d[i].clone(),
                u: self.inputs[i].clone(),
            })
            .collect()
    }
}

/// One sample `(e, x_d, u)` for the constant estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub e: Vec<f64>,
    pub xd: Vec<f64>,
    pub u: Vec<f64>,
}

fn check_dims(model: &NdaeModel, dnn: &DnnModel, a: &Matrix) -> Result<()> {
    check_len("DNN state", dnn.n(), model.n_d)?;
    check_len("DNN input", dnn.n_input(), model.m)?;
    if a.shape() != (model.n_d, model.n_d) {
        return Err(Error::dims(format!(
            "A must be {0}x{0}, got {1:?}",
            model.n_d,
            a.shape()
        )));
    }
    Ok(())
}

/// Mismatch term with `x_a` supplied. Also subtracts the DNN's own `h·w0`
/// so that `ė = A·e + φ` holds exactly.
pub(crate) fn phi_at(
    model: &NdaeModel,
    dnn: &DnnModel,
    a: &Matrix,
    e: &[f64],
    xd: &[f64],
    xa: &[f64],
    u: &[f64],
) -> Vec<f64> {
    let mut out = model.dynamic_rhs(xd, xa, u);
    let xnn: Vec<f64> = xd.iter().zip(e).map(|(x, ei)| x - ei).collect();
    // rhs_nn(x_d − e) = A_nn x_d − A_nn e + B_nn ρ̂(x_d − e) + C_nn γ(u) + h w0
    let f_nn = dnn.rhs_unchecked(&xnn, u);
    let ae = a.matvec_unchecked(e);
    for i in 0..out.len() {
        out[i] -= f_nn[i] + ae[i];
    }
    out
}

/// `φ(e, x_d, u) = A_d x_d + C_d f(x_d, ℓ(x_d)) + B u + h w0 − A_nn x_d
/// − (A − A_nn) e − B_nn ρ̂(x_d − e) − C_nn γ(u) − h_nn w0_nn`, with `ℓ`
/// from a Newton solve of the true constraint.
pub fn phi_eval(
    model: &NdaeModel,
    dnn: &DnnModel,
    a: &Matrix,
    e: &[f64],
    xd: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, dnn, a)?;
    check_len("e", e.len(), model.n_d)?;
    check_len("u", u.len(), model.m)?;
    let xa = model.consistent_init(xd, &vec![0.0; model.n_a])?;
    Ok(phi_at(model, dnn, a, e, xd, &xa, u))
}

/// True system augmented with the error state: dynamic part `[x_d; e]`,
/// algebraic part `x_a`.
struct ErrorSystem<'a> {
    model: &'a NdaeModel,
    dnn: &'a DnnModel,
    a: &'a Matrix,
}

impl DaeSystem for ErrorSystem<'_> {
    fn n_dyn(&self) -> usize {
        2 * self.model.n_d
    }

    fn n_alg(&self) -> usize {
        self.model.n_a
    }

    fn n_input(&self) -> usize {
        self.model.m
    }

    fn dynamic_rhs(&self, z: &[f64], xa: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.model.n_d;
        let (xd, e) = z.split_at(n);
        let mut out = self.model.dynamic_rhs(xd, xa, u);
        let mut de = phi_at(self.model, self.dnn, self.a, e, xd, xa, u);
        self.a.matvec_add(e, &mut de);
        out.extend(de);
        out
    }

    fn algebraic_residual(&self, z: &[f64], xa: &[f64]) -> Vec<f64> {
        self.model.algebraic_residual(&z[..self.model.n_d], xa)
    }

    fn jacobians(&self, z: &[f64], xa: &[f64], u: &[f64]) -> DaeJacobians {
        let n = self.model.n_d;
        let na = self.model.n_a;
        let (xd, e) = z.split_at(n);
        let m = self.model.jacobians(xd, xa, u);
        let xnn: Vec<f64> = xd.iter().zip(e).map(|(x, ei)| x - ei).collect();
        let jnn = self.dnn.jacobian_unchecked(&xnn);

        // ė = f(x_d, x_a, u) − rhs_nn(x_d − e)
        let mut fd_xd = Matrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                fd_xd[(r, c)] = m.fd_xd[(r, c)];
                fd_xd[(n + r, c)] = m.fd_xd[(r, c)] - jnn[(r, c)];
                fd_xd[(n + r, n + c)] = jnn[(r, c)];
            }
        }
        let mut fd_xa = Matrix::zeros(2 * n, na);
        for r in 0..n {
            for c in 0..na {
                fd_xa[(r, c)] = m.fd_xa[(r, c)];
                fd_xa[(n + r, c)] = m.fd_xa[(r, c)];
            }
        }
        let mut ga_xd = Matrix::zeros(na, 2 * n);
        for r in 0..na {
            for c in 0..n {
                ga_xd[(r, c)] = m.ga_xd[(r, c)];
            }
        }
        DaeJacobians {
            fd_xd,
            fd_xa,
            ga_xd,
            ga_xa: m.ga_xa,
        }
    }

    fn algebraic_jacobian_xa(&self, z: &[f64], xa: &[f64]) -> Matrix {
        self.model.algebraic_jacobian_xa(&z[..self.model.n_d], xa)
    }
}

/// Co-integrates the true system and `ė = A·e + φ` with the IRK solver.
#[allow(clippy::too_many_arguments)]
pub fn simulate_error(
    model: &NdaeModel,
    dnn: &DnnModel,
    a: &Matrix,
    xd0: &[f64],
    e0: &[f64],
    input: &dyn Fn(f64) -> Vec<f64>,
    t_end: f64,
    tableau: &ButcherTableau,
    config: &SolverConfig,
) -> Result<ErrorTrace> {
    check_dims(model, dnn, a)?;
    check_len("x_d0", xd0.len(), model.n_d)?;
    check_len("e0", e0.len(), model.n_d)?;
    if !is_hurwitz(a) {
        return Err(Error::NotHurwitz);
    }
    let sys = ErrorSystem { model, dnn, a };
    let mut z0 = xd0.to_vec();
    z0.extend_from_slice(e0);
    let traj = simulate(&sys, &z0, input, t_end, tableau, config)?;
    let n = model.n_d;
    let errors: Vec<Vec<f64>> = traj.states_d.iter().map(|z| z[n..].to_vec()).collect();
    Ok(ErrorTrace {
        error_norms: errors.iter().map(|e| norm(e)).collect(),
        errors,
        states_d: traj.states_d.iter().map(|z| z[..n].to_vec()).collect(),
        inputs: traj.inputs,
        times: traj.times,
    })
}
