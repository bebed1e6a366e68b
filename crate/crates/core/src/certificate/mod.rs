//! Lyapunov error certificate for an identified DNN.
//!
//! With `e = x_d − x_nn` the error obeys `ė = A·e + φ(e, x_d, u)` for any
//! Hurwitz `A`. If `φᵀLφ ≤ c0 + c1·eᵀKe` and
//! `AᵀP + PA + P·L⁻¹·P + c1·K + W ⪯ 0`, then
//! `limsup ‖e(t)‖ ≤ sqrt(c0 / (λ_min(P)·λ_min(P^{-1/2} W P^{-1/2})))`.
//!
//! The constants are estimated on a finite cloud of visited states, so the
//! certificate only covers what the cloud covers.

mod bounds;
mod dynamics;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bounds::{
    assumption3_matrix, check_assumption3, decay_rate, estimate_c0_c1, prop1_bound,
    riccati_candidate, Assumption3Check, FEASIBILITY_TOL, ZERO_ERROR_QUAD,
};
pub use dynamics::{phi_eval, simulate_error, CloudPoint, ErrorTrace};

use crate::error::Result;
use crate::model::NdaeModel;
use crate::nn::DnnModel;
use crate::numerics::Matrix;

/// Fraction of the horizon used for the empirical tail.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub a: Matrix,
    pub p: Matrix,
    pub w: Matrix,
    pub l: Matrix,
    pub k: Matrix,
    pub c0: f64,
    pub c1: f64,
    /// Asymptotic bound on `‖e‖`; binding only when `feasible`.
    pub bound: f64,
    pub feasible: bool,
    /// `−λ_max` of the matrix-inequality block.
    pub margin: f64,
    pub cloud_size: usize,
    /// Max `‖e(t)‖` over the tail of an attached simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_max: Option<f64>,
}

impl ErrorCertificate {
    /// Records the empirical tail of `trace`.
    pub fn attach(&mut self, trace: &ErrorTrace) {
        self.tail_max = Some(trace.tail_max(TAIL_FRACTION));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Estimates `(c0, c1)` on `cloud`, checks the matrix inequality and
/// evaluates the bound. An infeasible inequality still yields a bound,
/// flagged non-binding.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    model: &NdaeModel,
    dnn: &DnnModel,
    a: &Matrix,
    l: &Matrix,
    k: &Matrix,
    p: &Matrix,
    w: &Matrix,
    cloud: &[CloudPoint],
) -> Result<ErrorCertificate> {
    let (c0, c1) = estimate_c0_c1(model, dnn, a, l, k, cloud)?;
    let check = check_assumption3(a, p, w, l, k, c1)?;
    let bound = prop1_bound(p, w, c0)?;
    Ok(ErrorCertificate {
        a: a.clone(),
        p: p.clone(),
        w: w.clone(),
        l: l.clone(),
        k: k.clone(),
        c0,
        c1,
        bound,
        feasible: check.feasible,
        margin: check.margin,
        cloud_size: cloud.len(),
        tail_max: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::scalar_linear;
    use crate::nn::Mlp;

    fn dnn(a: f64, drift: f64) -> DnnModel {
        DnnModel::new(
            Matrix::from_diag(&[a]),
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            Mlp::zeros(&[1, 1]).unwrap(),
            vec![drift],
            1.0,
        )
        .unwrap()
    }

    fn pts() -> Vec<CloudPoint> {
        [(0.0, 1.0), (0.2, 0.5), (-0.4, -1.0)]
            .iter()
            .map(|&(e, x)| CloudPoint {
                e: vec![e],
                xd: vec![x],
                u: vec![0.0],
            })
            .collect()
    }

    #[test]
    fn perfect_identification_zero_bound() {
        let m = scalar_linear(-1.0, 1.0);
        let i = Matrix::identity(1);
        let a = i.scale(-1.0);
        let c = certify(&m, &dnn(-1.0, 0.0), &a, &i, &i, &i, &i.scale(0.25), &pts()).unwrap();
        assert_eq!((c.c0, c.c1, c.bound), (0.0, 0.0, 0.0));
        assert!(c.feasible);
    }

    #[test]
    fn diagonal_composition() {
        // φ = −0.5 constant → c0 = 0.25, c1 = 0; M = −2 + 1 + 0.25 < 0.
        let m = scalar_linear(-1.0, 1.0);
        let i = Matrix::identity(1);
        let a = i.scale(-1.0);
        let c = certify(&m, &dnn(-1.0, 0.5), &a, &i, &i, &i, &i.scale(0.25), &pts()).unwrap();
        assert!((c.c0 - 0.25).abs() < 1e-15);
        assert!(c.feasible);
        assert!((c.bound - 1.0).abs() < 1e-12);
        assert_eq!(c.cloud_size, 3);
    }

    #[test]
    fn infeasible_is_flagged_and_round_trips() {
        let m = scalar_linear(-1.0, 1.0);
        let i = Matrix::identity(1);
        let a = i.scale(-1.0);
        let mut c = certify(&m, &dnn(-1.0, 0.5), &a, &i, &i, &i, &i.scale(2.0), &pts()).unwrap();
        assert!(!c.feasible);
        assert!(c.bound.is_finite());
        c.tail_max = Some(0.1);
        let back = ErrorCertificate::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(c.to_json().unwrap().contains("\"tail_max\""));
    }
}
