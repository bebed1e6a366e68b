use serde::{Deserialize, Serialize};

use super::LossWeights;
use crate::nn::mean_abs;

/// Floor that keeps `w_a` strictly positive.
pub const W_A_MIN: f64 = 1e-12;
const RATIO_EPS: f64 = 1e-12;

/// `w_d·l_d + w_a·l_a`.
pub fn total_loss(l_d: f64, l_a: f64, w: &LossWeights) -> f64 {
    w.w_d * l_d + w.w_a * l_a
}

/// Gradient-magnitude balancing. With `ŵ_a = mean|grad_d| / (mean|grad_a| + ε)`
/// the weight moves as `w_a ← (1−λ)·w_a + λ·ŵ_a`; `w_d` stays 1. A vanishing
/// `grad_a` leaves `w_a` unchanged.
pub fn update_weights(w: &LossWeights, grad_d: &[f64], grad_a: &[f64]) -> LossWeights {
    let md = mean_abs(grad_d);
    let ma = mean_abs(grad_a);
    let mut out = LossWeights { w_d: 1.0, ..*w };
    if ma <= RATIO_EPS || !md.is_finite() || !ma.is_finite() {
        return out;
    }
    let target = md / (ma + RATIO_EPS);
    let lam = w.update_rate;
    out.w_a = ((1.0 - lam) * w.w_a + lam * target).max(W_A_MIN);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One update of `params` along `grad` with step `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }

    pub fn lr(&self) -> f64 {
        self.cfg.lr
    }
}
