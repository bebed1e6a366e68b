//! The semi-explicit power-system DAE
//!
//! ```text
//! ẋ_d = A_d·x_d + C_d·f(x_d, x_a) + B·u + h·w0
//!   0 = A_a·x_a + C_a·g(x_d, x_a)
//! ```
//!
//! with `f(0,0) = 0`, `g(0,0) = 0` and an invertible `∂g̃/∂x_a`.

mod json;
mod synthetic;
mod terms;

use std::fmt;
use std::sync::Arc;

pub use json::ModelDocument;
pub use synthetic::{build_synthetic_model, build_synthetic_model_with, SyntheticOptions};
pub use terms::{FnMap, NonlinearMap, Term, TermList, TermOp};

use crate::dae::{DaeJacobians, DaeSystem};
use crate::error::{check_len, Error, Result};
use crate::numerics::{
    finite_diff_jacobian, newton_solve, sym_eig_min, Matrix, NewtonOptions,
};

/// Tolerance used by [`NdaeModel::consistent_init`].
pub const CONSISTENT_INIT_TOL: f64 = 1e-10;

const FD_STEP: f64 = 1e-6;

#[derive(Clone)]
pub struct NdaeModel {
    pub n_d: usize,
    pub n_a: usize,
    pub m: usize,
    pub a_d: Matrix,
    pub c_d: Matrix,
    pub b: Matrix,
    pub a_a: Matrix,
    pub c_a: Matrix,
    pub h: Vec<f64>,
    pub w0: f64,
    pub f: Arc<dyn NonlinearMap>,
    pub g: Arc<dyn NonlinearMap>,
}

impl fmt::Debug for NdaeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NdaeModel")
            .field("n_d", &self.n_d)
            .field("n_a", &self.n_a)
            .field("m", &self.m)
            .field("n_f", &self.f.dim())
            .field("n_g", &self.g.dim())
            .finish_non_exhaustive()
    }
}

impl NdaeModel {
    /// Assembles a model and checks every shape against `n_d`, `n_a`, `m`
    /// and the nonlinearity output sizes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a_d: Matrix,
        c_d: Matrix,
        b: Matrix,
        a_a: Matrix,
        c_a: Matrix,
        h: Vec<f64>,
        w0: f64,
        f: Arc<dyn NonlinearMap>,
        g: Arc<dyn NonlinearMap>,
    ) -> Result<Self> {
        let n_d = a_d.rows();
        let n_a = a_a.rows();
        let m = b.cols();
        let expect = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::dims(format!("{name}: expected {want:?}, got {got:?}")))
            }
        };
        expect("A_d", a_d.shape(), (n_d, n_d))?;
        expect("C_d", c_d.shape(), (n_d, f.dim()))?;
        expect("B", b.shape(), (n_d, m))?;
        expect("A_a", a_a.shape(), (n_a, n_a))?;
        expect("C_a", c_a.shape(), (n_a, g.dim()))?;
        check_len("h", h.len(), n_d)?;
        for (name, tl) in [("f", f.as_terms()), ("g", g.as_terms())] {
            if let Some(tl) = tl {
                tl.validate(n_d, n_a)
                    .map_err(|e| Error::InvalidArgument(format!("{name}: {e}")))?;
            }
        }
        let finite = [&a_d, &c_d, &b, &a_a, &c_a].iter().all(|m| m.is_finite())
            && h.iter().all(|v| v.is_finite())
            && w0.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("non-finite model entry".into()));
        }
        Ok(Self {
            n_d,
            n_a,
            m,
            a_d,
            c_d,
            b,
            a_a,
            c_a,
            h,
            w0,
            f,
            g,
        })
    }

    fn check_state(&self, xd: &[f64], xa: &[f64]) -> Result<()> {
        check_len("x_d", xd.len(), self.n_d)?;
        check_len("x_a", xa.len(), self.n_a)
    }

    /// `A_d·x_d + C_d·f(x_d,x_a) + B·u + h·w0`
    pub fn eval_dynamic_rhs(&self, xd: &[f64], xa: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_state(xd, xa)?;
        check_len("u", u.len(), self.m)?;
        Ok(self.rhs(xd, xa, u))
    }

    /// `A_a·x_a + C_a·g(x_d,x_a)`
    pub fn eval_algebraic_residual(&self, xd: &[f64], xa: &[f64]) -> Result<Vec<f64>> {
        self.check_state(xd, xa)?;
        Ok(self.residual(xd, xa))
    }

    /// `∂g̃/∂x_a`, analytic when `g` provides it.
    pub fn algebraic_jacobian(&self, xd: &[f64], xa: &[f64]) -> Result<Matrix> {
        self.check_state(xd, xa)?;
        Ok(self.jac_g_xa(xd, xa))
    }

    /// Smallest singular value of `∂g̃/∂x_a` over the points; positive
    /// values certify index 1 along the sample.
    pub fn index1_margin(&self, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("index1_margin needs at least one point".into()));
        }
        let mut margin = f64::INFINITY;
        for (xd, xa) in points {
            let j = self.algebraic_jacobian(xd, xa)?;
            let jtj = j.transpose().matmul(&j)?;
            let lam = sym_eig_min(&jtj)?.max(0.0);
            margin = margin.min(lam.sqrt());
        }
        Ok(margin)
    }

    /// Solves `g̃(x_d0, x_a) = 0` by Newton from `xa_guess`.
    pub fn consistent_init(&self, xd0: &[f64], xa_guess: &[f64]) -> Result<Vec<f64>> {
        self.check_state(xd0, xa_guess)?;
        solve_algebraic(self, xd0, xa_guess, CONSISTENT_INIT_TOL, 50)
    }

    fn rhs(&self, xd: &[f64], xa: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.a_d.matvec_unchecked(xd);
        let fv = self.f.eval(xd, xa);
        self.c_d.matvec_add(&fv, &mut out);
        self.b.matvec_add(u, &mut out);
        for (o, hi) in out.iter_mut().zip(&self.h) {
            *o += hi * self.w0;
        }
        out
    }

    fn residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        let mut out = self.a_a.matvec_unchecked(xa);
        let gv = self.g.eval(xd, xa);
        self.c_a.matvec_add(&gv, &mut out);
        out
    }

    fn nonlinear_jacobians(
        map: &dyn NonlinearMap,
        xd: &[f64],
        xa: &[f64],
    ) -> (Matrix, Matrix) {
        map.jacobians(xd, xa).unwrap_or_else(|| {
            (
                finite_diff_jacobian(&|x: &[f64]| map.eval(x, xa), xd, FD_STEP),
                finite_diff_jacobian(&|x: &[f64]| map.eval(xd, x), xa, FD_STEP),
            )
        })
    }

    fn jac_g_xa(&self, xd: &[f64], xa: &[f64]) -> Matrix {
        let (_, g_xa) = Self::nonlinear_jacobians(self.g.as_ref(), xd, xa);
        let mut j = self.c_a.matmul(&g_xa).expect("validated shapes");
        for i in 0..self.n_a {
            for k in 0..self.n_a {
                j[(i, k)] += self.a_a[(i, k)];
            }
        }
        j
    }
}

/// Newton solve of `g̃(x_d, ·) = 0` for any semi-explicit system.
pub(crate) fn solve_algebraic<S: DaeSystem + ?Sized>(
    system: &S,
    xd: &[f64],
    xa_guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if system.n_alg() == 0 {
        return Ok(Vec::new());
    }
    let res = |xa: &[f64]| system.algebraic_residual(xd, xa);
    let jac = |xa: &[f64]| system.algebraic_jacobian_xa(xd, xa);
    let report = newton_solve(&res, Some(&jac), xa_guess, &NewtonOptions::new(tol, max_iter))?;
    Ok(report.x)
}

impl DaeSystem for NdaeModel {
    fn n_dyn(&self) -> usize {
        self.n_d
    }

    fn n_alg(&self) -> usize {
        self.n_a
    }

    fn n_input(&self) -> usize {
        self.m
    }

    fn dynamic_rhs(&self, xd: &[f64], xa: &[f64], u: &[f64]) -> Vec<f64> {
        self.rhs(xd, xa, u)
    }

    fn algebraic_residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        self.residual(xd, xa)
    }

    fn jacobians(&self, xd: &[f64], xa: &[f64], _u: &[f64]) -> DaeJacobians {
        let (f_xd, f_xa) = Self::nonlinear_jacobians(self.f.as_ref(), xd, xa);
        let (g_xd, g_xa) = Self::nonlinear_jacobians(self.g.as_ref(), xd, xa);
        let fd_xd = self
            .a_d
            .add(&self.c_d.matmul(&f_xd).expect("validated shapes"))
            .expect("validated shapes");
        let fd_xa = self.c_d.matmul(&f_xa).expect("validated shapes");
        let ga_xd = self.c_a.matmul(&g_xd).expect("validated shapes");
        let ga_xa = self
            .a_a
            .add(&self.c_a.matmul(&g_xa).expect("validated shapes"))
            .expect("validated shapes");
        DaeJacobians {
            fd_xd,
            fd_xa,
            ga_xd,
            ga_xa,
        }
    }

    fn algebraic_jacobian_xa(&self, xd: &[f64], xa: &[f64]) -> Matrix {
        self.jac_g_xa(xd, xa)
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn zero_terms(dim: usize) -> Arc<dyn NonlinearMap> {
        Arc::new(TermList::new(dim, vec![]))
    }

    #[test]
    fn zero_model_rhs_is_zero() {
        let m = NdaeModel::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(2, 1),
            Matrix::identity(1),
            Matrix::zeros(1, 0),
            vec![0.0; 2],
            1.0,
            Arc::new(TermList::new(1, vec![Term::sin_diff(0, 0, 1, 1.0)])),
            zero_terms(0),
        )
        .unwrap();
        assert_eq!(m.eval_dynamic_rhs(&[1.0, -3.0], &[2.0], &[5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_part_and_sine() {
        let m = NdaeModel::new(
            Matrix::identity(2).scale(-1.0),
            Matrix::zeros(2, 0),
            Matrix::zeros(2, 1),
            Matrix::identity(1),
            Matrix::zeros(1, 0),
            vec![0.0; 2],
            0.0,
            zero_terms(0),
            zero_terms(0),
        )
        .unwrap();
        assert_eq!(m.eval_dynamic_rhs(&[1.0, 2.0], &[0.0], &[0.0]).unwrap(), vec![-1.0, -2.0]);

        // f(x_d, x_a) = sin(x_d,1 − x_d,2) with x_d,2 = 0
        let m = NdaeModel::new(
            Matrix::zeros(2, 2),
            Matrix::from_rows(&[&[1.0], &[0.0]]),
            Matrix::zeros(2, 1),
            Matrix::identity(1),
            Matrix::zeros(1, 0),
            vec![0.0; 2],
            0.0,
            Arc::new(TermList::new(1, vec![Term::sin_diff(0, 0, 1, 1.0)])),
            zero_terms(0),
        )
        .unwrap();
        let out = m.eval_dynamic_rhs(&[FRAC_PI_2, 0.0], &[0.0], &[0.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn algebraic_residual_examples() {
        let m = NdaeModel::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 0),
            Matrix::zeros(1, 1),
            Matrix::identity(2),
            Matrix::zeros(2, 0),
            vec![0.0],
            0.0,
            zero_terms(0),
            zero_terms(0),
        )
        .unwrap();
        assert_eq!(m.eval_algebraic_residual(&[0.5], &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(m.eval_algebraic_residual(&[0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let m = scalar_linear(-1.0, 2.0);
        assert_eq!(m.eval_algebraic_residual(&[1.0], &[2.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            m.eval_algebraic_residual(&[1.0, 2.0], &[2.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn algebraic_jacobian_examples() {
        let m = scalar_linear(-1.0, 2.0);
        assert_eq!(m.algebraic_jacobian(&[4.0], &[1.0]).unwrap()[(0, 0)], 1.0);

        let m = scalar_constraint(|xd, xa| xa * xa - xd);
        let j = m.algebraic_jacobian(&[1.0], &[3.0]).unwrap();
        assert!((j[(0, 0)] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn index1_margin_examples() {
        let m = scalar_linear(-1.0, 2.0);
        let pts = vec![(vec![0.0], vec![0.0]), (vec![5.0], vec![-3.0])];
        assert!((m.index1_margin(&pts).unwrap() - 1.0).abs() < 1e-12);

        let m = NdaeModel::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 0),
            Matrix::zeros(1, 1),
            Matrix::from_diag(&[2.0, 3.0]),
            Matrix::zeros(2, 0),
            vec![0.0],
            0.0,
            zero_terms(0),
            zero_terms(0),
        )
        .unwrap();
        let margin = m.index1_margin(&[(vec![1.0], vec![1.0, 1.0])]).unwrap();
        assert!((margin - 2.0).abs() < 1e-12);

        let m = scalar_constraint(|_, xa| xa * xa);
        let margin = m.index1_margin(&[(vec![0.0], vec![0.0])]).unwrap();
        assert!(margin.abs() < 1e-9);
        assert!(m.index1_margin(&[]).is_err());
    }

    #[test]
    fn consistent_init_examples() {
        let m = scalar_linear(-1.0, 2.0);
        assert!((m.consistent_init(&[3.0], &[0.0]).unwrap()[0] - 6.0).abs() < 1e-12);

        let m = scalar_constraint(|xd, xa| xa - xd.sin());
        assert!(m.consistent_init(&[0.0], &[0.3]).unwrap()[0].abs() < 1e-10);

        // a³ + a = 2 has the real root a = 1.
        let m = scalar_constraint(|xd, xa| xa * xa * xa + xa - xd);
        let xa = m.consistent_init(&[2.0], &[1.0]).unwrap();
        assert!((xa[0] - 1.0).abs() < 1e-10);
        let xa = m.consistent_init(&[2.0], &[3.0]).unwrap();
        assert!(m.eval_algebraic_residual(&[2.0], &xa).unwrap()[0].abs() <= CONSISTENT_INIT_TOL);
    }

    #[test]
    fn constructor_checks_shapes() {
        let err = NdaeModel::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(1, 0),
            Matrix::zeros(2, 1),
            Matrix::identity(1),
            Matrix::zeros(1, 0),
            vec![0.0; 2],
            0.0,
            zero_terms(0),
            zero_terms(0),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }
}
