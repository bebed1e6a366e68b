use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const ORDER_CONDITION_TOL: f64 = 1e-14;

/// Implicit Runge–Kutta coefficients. `b` is the ν×ν stage matrix and `c`
/// the weights, so one step reads
///
/// ```text
/// α_j     = x_n + Δ Σ_i b[j][i] f(α_i)
/// x_{n+1} = x_n + Δ Σ_j c[j]    f(α_j)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButcherTableau {
    pub name: String,
    pub nu: usize,
    pub b: Matrix,
    pub c: Vec<f64>,
    pub order: usize,
}

impl ButcherTableau {
    /// Builds a tableau after checking `Σ c = 1` and `Σ_j c_j Σ_k b_jk = 1/2`.
    pub fn new(name: impl Into<String>, b: Matrix, c: Vec<f64>, order: usize) -> Result<Self> {
        let nu = c.len();
        if nu == 0 || b.shape() != (nu, nu) {
            return Err(Error::dims(format!(
                "tableau needs a {nu}x{nu} stage matrix, got {:?}",
                b.shape()
            )));
        }
        let t = Self {
            name: name.into(),
            nu,
            b,
            c,
            order,
        };
        let (first, second) = t.order_defects();
        if first > ORDER_CONDITION_TOL || (order >= 2 && second > ORDER_CONDITION_TOL) {
            return Err(Error::InvalidArgument(format!(
                "tableau '{}' fails the order conditions ({first:e}, {second:e})",
                t.name
            )));
        }
        Ok(t)
    }

    /// Stage abscissae `Σ_k b[j][k]`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nu).map(|j| self.b.row(j).iter().sum()).collect()
    }

    /// `(|Σ c − 1|, |Σ c_j·rowsum_j − 1/2|)`.
    pub fn order_defects(&self) -> (f64, f64) {
        let first = (self.c.iter().sum::<f64>() - 1.0).abs();
        let second = (self
            .c
            .iter()
            .zip(self.row_sums())
            .map(|(cj, rj)| cj * rj)
            .sum::<f64>()
            - 0.5)
            .abs();
        (first, second)
    }

    pub fn midpoint() -> Self {
        Self::new("midpoint", Matrix::from_rows(&[&[0.5]]), vec![1.0], 2)
            .expect("midpoint coefficients")
    }

    pub fn radau2() -> Self {
        Self::new(
            "radau2",
            Matrix::from_rows(&[&[5.0 / 12.0, -1.0 / 12.0], &[0.75, 0.25]]),
            vec![0.75, 0.25],
            3,
        )
        .expect("Radau IIA coefficients")
    }

    pub fn gauss2() -> Self {
        let s = 3f64.sqrt() / 6.0;
        Self::new(
            "gauss2",
            Matrix::from_rows(&[&[0.25, 0.25 - s], &[0.25 + s, 0.25]]),
            vec![0.5, 0.5],
            4,
        )
        .expect("Gauss-Legendre coefficients")
    }
}

/// Implicit midpoint (order 2), 2-stage Radau IIA (order 3) and 2-stage
/// Gauss–Legendre (order 4).
pub fn builtin_tableaus() -> Vec<ButcherTableau> {
    vec![
        ButcherTableau::midpoint(),
        ButcherTableau::radau2(),
        ButcherTableau::gauss2(),
    ]
}

/// Looks up a built-in tableau by name (`midpoint`, `radau2`, `gauss2`).
pub fn tableau(name: &str) -> Result<ButcherTableau> {
    builtin_tableaus()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::UnknownTableau(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_satisfy_order_conditions() {
        for t in builtin_tableaus() {
            let (a, b) = t.order_defects();
            assert!(a < 1e-15 && b < 1e-15, "{}", t.name);
            assert!(t.row_sums().iter().all(|&r| (0.0..=1.0).contains(&r)));
        }
    }

    #[test]
    fn coefficients() {
        let m = ButcherTableau::midpoint();
        assert_eq!((m.nu, m.b[(0, 0)], m.c.clone()), (1, 0.5, vec![1.0]));
        let r = ButcherTableau::radau2();
        assert_eq!(r.b.as_slice(), &[5.0 / 12.0, -1.0 / 12.0, 0.75, 0.25]);
        assert_eq!(r.c, vec![0.75, 0.25]);
        // collocation at 1/3 and 1
        let rs = r.row_sums();
        assert!((rs[0] - 1.0 / 3.0).abs() < 1e-15 && (rs[1] - 1.0).abs() < 1e-15);
        let g = ButcherTableau::gauss2();
        assert_eq!(g.order, 4);
    }

    #[test]
    fn third_order_condition_for_radau_and_gauss() {
        // Σ c_j r_j² = 1/3 and Σ c_j b_jk r_k = 1/6
        for t in [ButcherTableau::radau2(), ButcherTableau::gauss2()] {
            let r = t.row_sums();
            let s1: f64 = (0..2).map(|j| t.c[j] * r[j] * r[j]).sum();
            let s2: f64 = (0..2)
                .flat_map(|j| (0..2).map(move |k| (j, k)))
                .map(|(j, k)| t.c[j] * t.b[(j, k)] * r[k])
                .sum();
            assert!((s1 - 1.0 / 3.0).abs() < 1e-15 && (s2 - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_inconsistent_weights() {
        let err = ButcherTableau::new("bad", Matrix::from_rows(&[&[0.5]]), vec![0.9], 1);
        assert!(err.is_err());
        assert!(matches!(tableau("rk4"), Err(Error::UnknownTableau(_))));
        assert_eq!(tableau("gauss2").unwrap().name, "gauss2");
    }
}
