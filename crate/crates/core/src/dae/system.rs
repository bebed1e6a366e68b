use crate::numerics::{finite_diff_jacobian, Matrix};

const FD_STEP: f64 = 1e-6;

/// Partial derivatives of a semi-explicit system at one point.
#[derive(Clone, Debug)]
pub struct DaeJacobians {
    /// ∂f̃/∂x_d
    pub fd_xd: Matrix,
    /// ∂f̃/∂x_a
    pub fd_xa: Matrix,
    /// ∂g̃/∂x_d
    pub ga_xd: Matrix,
    /// ∂g̃/∂x_a
    pub ga_xa: Matrix,
}

/// A semi-explicit index-1 system `ẋ_d = f̃(x_d, x_a, u)`, `0 = g̃(x_d, x_a)`.
///
/// Implementations may assume correctly sized arguments; public entry
/// points check dimensions before calling in.
pub trait DaeSystem: Sync {
    fn n_dyn(&self) -> usize;
    fn n_alg(&self) -> usize;
    fn n_input(&self) -> usize;

    fn dynamic_rhs(&self, xd: &[f64], xa: &[f64], u: &[f64]) -> Vec<f64>;

    fn algebraic_residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64>;

    /// Central-difference fallback; override with analytic derivatives.
    fn jacobians(&self, xd: &[f64], xa: &[f64], u: &[f64]) -> DaeJacobians {
        DaeJacobians {
            fd_xd: finite_diff_jacobian(&|x: &[f64]| self.dynamic_rhs(x, xa, u), xd, FD_STEP),
            fd_xa: finite_diff_jacobian(&|x: &[f64]| self.dynamic_rhs(xd, x, u), xa, FD_STEP),
            ga_xd: finite_diff_jacobian(&|x: &[f64]| self.algebraic_residual(x, xa), xd, FD_STEP),
            ga_xa: finite_diff_jacobian(&|x: &[f64]| self.algebraic_residual(xd, x), xa, FD_STEP),
        }
    }

    /// `∂g̃/∂x_a` alone; the default goes through [`DaeSystem::jacobians`].
    fn algebraic_jacobian_xa(&self, xd: &[f64], xa: &[f64]) -> Matrix {
        let u = vec![0.0; self.n_input()];
        self.jacobians(xd, xa, &u).ga_xa
    }
}
