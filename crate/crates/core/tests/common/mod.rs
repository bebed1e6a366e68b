#![allow(dead_code)]

use std::sync::Arc;

use ndae_ident::dae::{DaeSystem, SamplePair};
use ndae_ident::model::{NdaeModel, Term, TermList};
use ndae_ident::nn::{DnnModel, Mlp};
use ndae_ident::numerics::Matrix;

/// `ẋ_d = a·x_d`, `0 = x_a − k·x_d`.
pub fn scalar_linear(a: f64, k: f64) -> NdaeModel {
    NdaeModel::new(
        Matrix::from_diag(&[a]),
        Matrix::zeros(1, 0),
        Matrix::zeros(1, 1),
        Matrix::identity(1),
        Matrix::identity(1),
        vec![0.0],
        0.0,
        Arc::new(TermList::new(0, vec![])),
        Arc::new(TermList::new(1, vec![Term::linear(0, 0, -k)])),
    )
    .unwrap()
}

/// Small two-state DNN with one input.
pub fn toy_dnn(seed: u64) -> DnnModel {
    DnnModel::new(
        Matrix::from_rows(&[&[-0.7, 0.2], &[0.1, -0.4]]),
        Matrix::from_rows(&[&[0.3, -0.2, 0.1], &[0.5, 0.1, -0.3]]),
        Matrix::from_rows(&[&[1.0], &[0.3]]),
        Mlp::init(&[2, 4, 3], seed).unwrap(),
        vec![0.1, -0.2],
        1.0,
    )
    .unwrap()
}

/// Smooth, non-degenerate sample pairs with `n_d = n_a = 2`, `m = 1`.
pub fn toy_pairs(n: usize, delta: f64) -> Vec<SamplePair> {
    (0..n)
        .map(|k| {
            let t = k as f64 * delta;
            SamplePair {
                t,
                xd: vec![0.3 + t, -0.2 * t + 0.1],
                xa: vec![0.1, 0.4 - t],
                xd_next: vec![0.35 + t, -0.2 * t + 0.15],
                xa_next: vec![0.12, 0.38 - t],
                u: vec![0.5 - t],
                delta,
            }
        })
        .collect()
}

/// DNN dynamics with the constraint of a reference model.
pub struct DnnWithConstraint<'a> {
    pub dnn: &'a DnnModel,
    pub model: &'a NdaeModel,
}

impl DaeSystem for DnnWithConstraint<'_> {
    fn n_dyn(&self) -> usize {
        self.dnn.n()
    }
    fn n_alg(&self) -> usize {
        self.model.n_a
    }
    fn n_input(&self) -> usize {
        self.dnn.n_input()
    }
    fn dynamic_rhs(&self, xd: &[f64], _xa: &[f64], u: &[f64]) -> Vec<f64> {
        self.dnn.rhs(xd, u).unwrap()
    }
    fn algebraic_residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        self.model.eval_algebraic_residual(xd, xa).unwrap()
    }
}

/// `max_i |a_i − b_i| / max(|a_i|, |b_i|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
