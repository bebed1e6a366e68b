//! Small dense Lyapunov solves through the Kronecker form.

use super::eigen::sym_eig_min;
use super::lu::solve_linear;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Solves `Aᵀ·X + X·A + Q = 0` for `X`.
///
/// Builds the `n²×n²` system `(I⊗Aᵀ + Aᵀ⊗I)·vec(X) = −vec(Q)`; meant for
/// the state dimensions used here (n ≲ 40).
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || q.shape() != a.shape() {
        return Err(Error::dims(format!(
            "Lyapunov equation with A {:?} and Q {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let n = a.rows();
    // Row-major vec: X[i][j] ↦ i*n + j.
    // (AᵀX)[i][j] = Σ_k A[k][i] X[k][j];  (XA)[i][j] = Σ_k X[i][k] A[k][j].
    let mut big = Matrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                big[(row, k * n + j)] += a[(k, i)];
                big[(row, i * n + k)] += a[(k, j)];
            }
        }
    }
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let x = solve_linear(&big, &rhs)?;
    Ok(Matrix::from_row_major(n, n, x)?.symmetric_part())
}

/// Hurwitz test by the Lyapunov criterion: `A` is Hurwitz iff the
/// solution of `AᵀP + PA + I = 0` exists and is positive definite.
pub fn is_hurwitz(a: &Matrix) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.rows();
    match solve_lyapunov(a, &Matrix::identity(n)) {
        Ok(p) => p.is_finite() && sym_eig_min(&p).is_ok_and(|l| l > 0.0),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurwitz_classification() {
        assert!(is_hurwitz(&Matrix::from_diag(&[-1.0, -0.1])));
        assert!(!is_hurwitz(&Matrix::from_diag(&[-1.0, 0.1])));
        assert!(!is_hurwitz(&Matrix::zeros(2, 2)));
        // non-normal but stable: eigenvalues −1, −2
        assert!(is_hurwitz(&Matrix::from_rows(&[&[-1.0, 50.0], &[0.0, -2.0]])));
        // rotation with slight growth
        assert!(!is_hurwitz(&Matrix::from_rows(&[&[0.01, 1.0], &[-1.0, 0.01]])));
    }

    #[test]
    fn scalar_case() {
        // −2·x + 1 = 0 with a = −1
        let x = solve_lyapunov(&Matrix::from_diag(&[-1.0]), &Matrix::identity(1)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn residual_vanishes() {
        let a = Matrix::from_rows(&[&[-2.0, 1.0, 0.0], &[0.3, -1.0, 0.5], &[0.0, -0.4, -3.0]]);
        let q = Matrix::from_rows(&[&[2.0, 0.1, 0.0], &[0.1, 1.0, 0.2], &[0.0, 0.2, 1.5]]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let at = a.transpose();
        let res = at
            .matmul(&x)
            .unwrap()
            .add(&x.matmul(&a).unwrap())
            .unwrap()
            .add(&q)
            .unwrap();
        assert!(res.max_abs() < 1e-12);
    }
}
