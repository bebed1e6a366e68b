//! Dense linear algebra, Newton iteration, finite differences and
//! symmetric eigen-analysis used across the crate.

mod eigen;
mod lu;
mod lyapunov;
mod matrix;
mod newton;

pub use eigen::{spd_inv_sqrt, spd_sqrt, sym_eig_max, sym_eig_min, sym_eigen, SymEigen};
pub use lu::{invert, solve_linear, LuFactor, PIVOT_REL_TOL};
pub use lyapunov::{is_hurwitz, solve_lyapunov};
pub use matrix::{add, all_finite, axpy, dot, norm, scaled, sub, Matrix};
pub use newton::{finite_diff_jacobian, newton_solve, JacobianFn, NewtonOptions, NewtonReport};
