//! Symmetric eigenproblems via cyclic Jacobi rotations.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `m = V·diag(values)·Vᵀ`, values ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix,
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dims(format!(
            "symmetric eigenproblem on {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.norm_fro().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.symmetric_part();
    let mut v = Matrix::identity(n);
    let scale = a.norm_fro().max(1.0);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= OFF_DIAG_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

pub fn sym_eig_min(m: &Matrix) -> Result<f64> {
    Ok(sym_eigen(m)?.values.first().copied().unwrap_or(f64::NAN))
}

pub fn sym_eig_max(m: &Matrix) -> Result<f64> {
    Ok(sym_eigen(m)?.values.last().copied().unwrap_or(f64::NAN))
}

/// Applies `λ ↦ func(λ)` to the spectrum of a symmetric matrix.
fn spectral_map(eig: &SymEigen, func: impl Fn(f64) -> f64) -> Matrix {
    let n = eig.values.len();
    let mapped: Vec<f64> = eig.values.iter().map(|&l| func(l)).collect();
    let v = &eig.vectors;
    Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] * mapped[k] * v[(j, k)]).sum()
    })
}

fn spd_eigen(p: &Matrix) -> Result<SymEigen> {
    let eig = sym_eigen(p)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(eig)
}

/// Principal square root of a symmetric positive definite matrix.
pub fn spd_sqrt(p: &Matrix) -> Result<Matrix> {
    Ok(spectral_map(&spd_eigen(p)?, f64::sqrt))
}

/// `p^{-1/2}`, the principal square root of `p⁻¹`.
pub fn spd_inv_sqrt(p: &Matrix) -> Result<Matrix> {
    Ok(spectral_map(&spd_eigen(p)?, |l| 1.0 / l.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_min_examples() {
        assert!((sym_eig_min(&Matrix::from_diag(&[2.0, 5.0])).unwrap() - 2.0).abs() < 1e-14);
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((sym_eig_min(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!((sym_eig_max(&m).unwrap() - 3.0).abs() < 1e-12);
        assert!((sym_eig_min(&Matrix::identity(3)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eig_min(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn sqrt_examples() {
        let s = spd_sqrt(&Matrix::identity(2)).unwrap();
        assert!(s.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-15);
        let s = spd_sqrt(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!(s.sub(&Matrix::from_diag(&[2.0, 3.0])).unwrap().max_abs() < 1e-14);
        assert!(matches!(
            spd_sqrt(&Matrix::from_diag(&[4.0, -1.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn inv_sqrt_is_inverse_of_sqrt() {
        let p = Matrix::from_rows(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let s = spd_sqrt(&p).unwrap();
        let si = spd_inv_sqrt(&p).unwrap();
        let id = s.matmul(&si).unwrap();
        assert!(id.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-13);
    }
}
