use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dynamics::{phi_at, CloudPoint};
use crate::error::{check_len, Error, Result};
use crate::model::NdaeModel;
use crate::nn::DnnModel;
use crate::numerics::{
    dot, invert, is_hurwitz, solve_lyapunov, spd_inv_sqrt, sym_eig_max, sym_eig_min, Matrix,
};

/// `eᵀKe` below this counts as `e = 0`.
pub const ZERO_ERROR_QUAD: f64 = 1e-12;
/// Largest eigenvalue of `M` accepted as `M ⪯ 0`.
pub const FEASIBILITY_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-9;

fn quad(m: &Matrix, v: &[f64]) -> f64 {
    dot(v, &m.matvec_unchecked(v))
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dims(format!("expected a square matrix, got {:?}", m.shape())));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Tightest `(c0, c1)` with `φᵀLφ ≤ c0 + c1·eᵀKe` on the cloud.
///
/// First pass: `c0` is the max of `φᵀLφ` at `e = 0` for every cloud state
/// (and at the sample itself when `eᵀKe ≤ 10⁻¹²`). Second pass: `c1` is the
/// max of `(φᵀLφ − c0)/eᵀKe` over the remaining samples, floored at 0.
pub fn estimate_c0_c1(
    model: &NdaeModel,
    dnn: &DnnModel,
    a: &Matrix,
    l: &Matrix,
    k: &Matrix,
    cloud: &[CloudPoint],
) -> Result<(f64, f64)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = model.n_d;
    for mat in [a, l, k] {
        if mat.shape() != (n, n) {
            return Err(Error::dims(format!("expected {n}x{n}, got {:?}", mat.shape())));
        }
    }
    check_len("DNN state", dnn.n(), n)?;
    for p in cloud {
        check_len("cloud e", p.e.len(), n)?;
        check_len("cloud x_d", p.xd.len(), n)?;
        check_len("cloud u", p.u.len(), model.m)?;
    }
    let zero = vec![0.0; n];
    let guess = vec![0.0; model.n_a];
    // (φ(0)ᵀLφ(0), φ(e)ᵀLφ(e), eᵀKe) per sample
    let evals: Vec<Result<(f64, f64, f64)>> = cloud
        .par_iter()
        .map(|p| {
            let xa = model.consistent_init(&p.xd, &guess)?;
            let phi0 = phi_at(model, dnn, a, &zero, &p.xd, &xa, &p.u);
            let phi = phi_at(model, dnn, a, &p.e, &p.xd, &xa, &p.u);
            Ok((quad(l, &phi0), quad(l, &phi), quad(k, &p.e)))
        })
        .collect();
    let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
    let mut c0 = 0.0f64;
    for &(q0, q, ek) in &evals {
        c0 = c0.max(q0);
        if ek <= ZERO_ERROR_QUAD {
            c0 = c0.max(q);
        }
    }
    let c1 = evals
        .iter()
        .filter(|(_, _, ek)| *ek > ZERO_ERROR_QUAD)
        .map(|&(_, q, ek)| ((q - c0) / ek).max(0.0))
        .fold(0.0, f64::max);
    Ok((c0, c1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption3Check {
    pub feasible: bool,
    /// `−λ_max` of the symmetrized matrix.
    pub margin: f64,
}

/// `M = AᵀP + PA + P·L⁻¹·P + c1·K + W`; feasible when `λ_max(M) ≤ 10⁻¹⁰`.
pub fn assumption3_matrix(
    a: &Matrix,
    p: &Matrix,
    w: &Matrix,
    l: &Matrix,
    k: &Matrix,
    c1: f64,
) -> Result<Matrix> {
    for m in [p, w, l, k] {
        check_symmetric(m)?;
    }
    let n = a.rows();
    for m in [a, p, w, l, k] {
        if m.shape() != (n, n) {
            return Err(Error::dims(format!("expected {n}x{n}, got {:?}", m.shape())));
        }
    }
    let l_inv = invert(l)?;
    let pa = p.matmul(a)?;
    let m = pa
        .transpose()
        .add(&pa)?
        .add(&p.matmul(&l_inv)?.matmul(p)?)?
        .add(&k.scale(c1))?
        .add(w)?;
    Ok(m.symmetric_part())
}

pub fn check_assumption3(
    a: &Matrix,
    p: &Matrix,
    w: &Matrix,
    l: &Matrix,
    k: &Matrix,
    c1: f64,
) -> Result<Assumption3Check> {
    let m = assumption3_matrix(a, p, w, l, k, c1)?;
    let lmax = sym_eig_max(&m)?;
    Ok(Assumption3Check {
        feasible: lmax <= FEASIBILITY_TOL,
        margin: -lmax,
    })
}

/// `sqrt(c0 / (λ_min(P)·λ_min(P^{-1/2} W P^{-1/2})))`.
pub fn prop1_bound(p: &Matrix, w: &Matrix, c0: f64) -> Result<f64> {
    if !(c0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("c0 must be non-negative, got {c0}")));
    }
    check_symmetric(p)?;
    check_symmetric(w)?;
    let lp = sym_eig_min(p)?;
    let lw = decay_rate(p, w)?;
    Ok((c0 / (lp * lw)).sqrt())
}

/// `λ_min(P^{-1/2} W P^{-1/2})`, the decay rate of `eᵀPe`.
pub fn decay_rate(p: &Matrix, w: &Matrix) -> Result<f64> {
    let s = spd_inv_sqrt(p)?;
    let wt = s.matmul(w)?.matmul(&s)?.symmetric_part();
    let lw = sym_eig_min(&wt)?;
    if !(lw > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lw });
    }
    Ok(lw)
}

const RICCATI_TOL: f64 = 1e-12;
const RICCATI_MAX_ITER: usize = 50;

/// Candidate `P` solving `AᵀP + PA + P·L⁻¹·P + Q = 0` with `Q = c1·K + W`,
/// by Newton–Kleinman from the Lyapunov solution `AᵀP₀ + P₀A + Q = 0`.
/// Fails with `NotHurwitz` when an iterate loses stability (no stabilizing
/// solution) and `NoConvergence` when the iteration stalls.
pub fn riccati_candidate(
    a: &Matrix,
    l: &Matrix,
    k: &Matrix,
    w: &Matrix,
    c1: f64,
) -> Result<Matrix> {
    if !is_hurwitz(a) {
        return Err(Error::NotHurwitz);
    }
    let r = invert(l)?;
    let q = k.scale(c1).add(w)?;
    let mut p = solve_lyapunov(a, &q)?;
    let scale = q.max_abs().max(1.0);
    for _ in 0..RICCATI_MAX_ITER {
        let rp = r.matmul(&p)?;
        let prp = p.matmul(&rp)?;
        let ak = a.add(&rp)?;
        if !is_hurwitz(&ak) {
            return Err(Error::NotHurwitz);
        }
        let next = solve_lyapunov(&ak, &q.sub(&prp)?)?;
        let step = next.sub(&p)?.max_abs();
        p = next;
        if step <= RICCATI_TOL * p.max_abs().max(scale) {
            return Ok(p);
        }
    }
    let res = assumption3_matrix(a, &p, w, l, k, c1)?.max_abs();
    Err(Error::NoConvergence {
        iterations: RICCATI_MAX_ITER,
        residual: res,
    })
}
