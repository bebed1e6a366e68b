//! Nonlinearities of the form `(x_d, x_a) ↦ R^k` used in the dynamic and
//! algebraic equations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A nonlinear map of the state pair with an optional analytic Jacobian.
pub trait NonlinearMap: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, xd: &[f64], xa: &[f64]) -> Vec<f64>;

    /// `(∂/∂x_d, ∂/∂x_a)` when available; `None` requests finite differences.
    fn jacobians(&self, _xd: &[f64], _xa: &[f64]) -> Option<(Matrix, Matrix)> {
        None
    }

    /// The term-list form, if this map has one (required for serialization).
    fn as_terms(&self) -> Option<&TermList> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermOp {
    /// `coeff · sin(x_d[i] − x_d[j])`, indices `[i, j]`.
    SinDiff,
    /// `coeff · cos(x_d[i]) · x_a[k]`, indices `[i, k]`.
    CosTimes,
    /// `coeff · y[i]` with `y = [x_d; x_a]`, indices `[i]`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub op: TermOp,
    /// Output component this term is added into.
    pub out: usize,
    pub indices: Vec<usize>,
    pub coeff: f64,
}

impl Term {
    pub fn sin_diff(out: usize, i: usize, j: usize, coeff: f64) -> Self {
        Self {
            op: TermOp::SinDiff,
            out,
            indices: vec![i, j],
            coeff,
        }
    }

    pub fn cos_times(out: usize, i: usize, k: usize, coeff: f64) -> Self {
        Self {
            op: TermOp::CosTimes,
            out,
            indices: vec![i, k],
            coeff,
        }
    }

    pub fn linear(out: usize, i: usize, coeff: f64) -> Self {
        Self {
            op: TermOp::Linear,
            out,
            indices: vec![i],
            coeff,
        }
    }
}

/// Sum-of-terms nonlinearity. Every op vanishes at the origin, so
/// `eval(0, 0) = 0` holds by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermList {
    pub dim: usize,
    pub terms: Vec<Term>,
}

impl TermList {
    pub fn new(dim: usize, terms: Vec<Term>) -> Self {
        Self { dim, terms }
    }

    pub fn validate(&self, n_d: usize, n_a: usize) -> Result<()> {
        for (idx, t) in self.terms.iter().enumerate() {
            let bad = |msg: &str| Err(Error::InvalidArgument(format!("term {idx}: {msg}")));
            if t.out >= self.dim {
                return bad("output index out of range");
            }
            if !t.coeff.is_finite() {
                return bad("non-finite coefficient");
            }
            match (t.op, t.indices.as_slice()) {
                (TermOp::SinDiff, &[i, j]) if i < n_d && j < n_d => {}
                (TermOp::CosTimes, &[i, k]) if i < n_d && k < n_a => {}
                (TermOp::Linear, &[i]) if i < n_d + n_a => {}
                _ => return bad("indices do not match the op or state dimensions"),
            }
        }
        Ok(())
    }

    /// Row bound on `|∂/∂x_a|` entries: `bound[out][k] ≥ |∂ eval_out / ∂ x_a[k]|`
    /// everywhere.
    pub(crate) fn xa_lipschitz_bounds(&self, n_d: usize, n_a: usize) -> Matrix {
        let mut bound = Matrix::zeros(self.dim, n_a);
        for t in &self.terms {
            match (t.op, t.indices.as_slice()) {
                (TermOp::CosTimes, &[_, k]) => bound[(t.out, k)] += t.coeff.abs(),
                (TermOp::Linear, &[i]) if i >= n_d => bound[(t.out, i - n_d)] += t.coeff.abs(),
                _ => {}
            }
        }
        bound
    }
}

impl NonlinearMap for TermList {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        let n_d = xd.len();
        let mut out = vec![0.0; self.dim];
        for t in &self.terms {
            let v = match (t.op, t.indices.as_slice()) {
                (TermOp::SinDiff, &[i, j]) => (xd[i] - xd[j]).sin(),
                (TermOp::CosTimes, &[i, k]) => xd[i].cos() * xa[k],
                (TermOp::Linear, &[i]) => {
                    if i < n_d {
                        xd[i]
                    } else {
                        xa[i - n_d]
                    }
                }
                _ => unreachable!("validated term"),
            };
            out[t.out] += t.coeff * v;
        }
        out
    }

    fn jacobians(&self, xd: &[f64], xa: &[f64]) -> Option<(Matrix, Matrix)> {
        let n_d = xd.len();
        let mut jd = Matrix::zeros(self.dim, n_d);
        let mut ja = Matrix::zeros(self.dim, xa.len());
        for t in &self.terms {
            match (t.op, t.indices.as_slice()) {
                (TermOp::SinDiff, &[i, j]) => {
                    let c = t.coeff * (xd[i] - xd[j]).cos();
                    jd[(t.out, i)] += c;
                    jd[(t.out, j)] -= c;
                }
                (TermOp::CosTimes, &[i, k]) => {
                    jd[(t.out, i)] -= t.coeff * xd[i].sin() * xa[k];
                    ja[(t.out, k)] += t.coeff * xd[i].cos();
                }
                (TermOp::Linear, &[i]) => {
                    if i < n_d {
                        jd[(t.out, i)] += t.coeff;
                    } else {
                        ja[(t.out, i - n_d)] += t.coeff;
                    }
                }
                _ => unreachable!("validated term"),
            }
        }
        Some((jd, ja))
    }

    fn as_terms(&self) -> Option<&TermList> {
        Some(self)
    }
}

type EvalFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Closure-backed nonlinearity without an analytic Jacobian.
pub struct FnMap {
    dim: usize,
    eval: Box<EvalFn>,
}

impl FnMap {
    pub fn new(
        dim: usize,
        eval: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Box::new(eval),
        }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap").field("dim", &self.dim).finish()
    }
}

impl NonlinearMap for FnMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        (self.eval)(xd, xa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_jacobian;

    fn sample() -> TermList {
        TermList::new(
            3,
            vec![
                Term::sin_diff(0, 0, 1, 0.7),
                Term::cos_times(1, 1, 0, -1.3),
                Term::linear(2, 0, 2.0),
                Term::linear(2, 3, 0.5),
            ],
        )
    }

    #[test]
    fn vanishes_at_origin() {
        assert_eq!(sample().eval(&[0.0, 0.0], &[0.0, 0.0]), vec![0.0; 3]);
    }

    #[test]
    fn analytic_jacobian_matches_fd() {
        let tl = sample();
        tl.validate(2, 2).unwrap();
        let xd = [0.4, -1.1];
        let xa = [2.0, 0.3];
        let (jd, ja) = tl.jacobians(&xd, &xa).unwrap();
        let fd_d = finite_diff_jacobian(&|x: &[f64]| tl.eval(x, &xa), &xd, 1e-6);
        let fd_a = finite_diff_jacobian(&|x: &[f64]| tl.eval(&xd, x), &xa, 1e-6);
        assert!(jd.sub(&fd_d).unwrap().max_abs() < 1e-8);
        assert!(ja.sub(&fd_a).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn validation_rejects_bad_indices() {
        let tl = TermList::new(1, vec![Term::cos_times(0, 0, 5, 1.0)]);
        assert!(tl.validate(2, 2).is_err());
        let tl = TermList::new(
            1,
            vec![Term {
                op: TermOp::SinDiff,
                out: 0,
                indices: vec![0],
                coeff: 1.0,
            }],
        );
        assert!(tl.validate(2, 2).is_err());
    }
}
