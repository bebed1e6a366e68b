//! IRK-constrained penalty training.
//!
//! Two phases: [`train_algebraic`] fits ℓ̂ to `x_a ≈ ℓ̂(x_d)`, then
//! [`train_dynamic`] fits a [`DnnModel`](crate::nn::DnnModel) by penalizing
//! the implicit Runge–Kutta stage equations (`L_d`) and the distance of the
//! stages from the algebraic manifold (`L_a`).

mod algebraic;
mod dynamic;
mod loss;
mod metrics;
mod optim;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use algebraic::{mse_algebraic, train_algebraic, AlgebraicTrainResult};
pub use dynamic::{
    implicit_loss_and_gradient, solve_surrogate_stages, train_dynamic, train_dynamic_with,
    DynamicTrainResult,
};
pub use loss::{
    collocation_gradients, init_stages, loss_algebraic, loss_dynamic, LossGradients,
    ManifoldResidual, ModelResidual, StageVariables, SurrogateResidual,
};
pub use metrics::{
    component_errors, mean_relative_error, relative_error_series, ComponentError, StateGroup,
    UNDEFINED_RELATIVE_ERROR,
};
pub use optim::{total_loss, update_weights, Adam, AdamConfig, W_A_MIN};

use crate::error::{Error, Result};
use crate::table;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_d: f64,
    pub w_a: f64,
    /// λ in `w_a ← (1−λ)·w_a + λ·ŵ_a`.
    pub update_rate: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_d: 1.0,
            w_a: 1.0,
            update_rate: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Stage values are free decision variables optimized with θ.
    #[default]
    Collocation,
    /// Stage values solved by Newton each epoch; endpoint-mismatch loss with
    /// adjoint gradients.
    ImplicitSolve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    /// Mini-batch size for the algebraic phase; 0 means full batch. The
    /// dynamic phase is always full batch.
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    /// Learning rate reached at the last epoch by geometric decay from
    /// `lr`; `None` keeps `lr` constant.
    pub lr_final: Option<f64>,
    pub seed: u64,
    pub tableau: String,
    pub weights: LossWeights,
    /// Epochs between adaptive weight updates; 0 keeps the weights fixed.
    pub weight_update_every: usize,
    /// Newton settings for the implicit-solve mode.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Collocation,
            epochs: 1000,
            batch_size: 0,
            adam: AdamConfig::default(),
            lr_final: None,
            seed: 0,
            tableau: "radau2".into(),
            weights: LossWeights::default(),
            weight_update_every: 10,
            newton_tol: 1e-10,
            newton_max_iter: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let ok = a.lr > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0
            && self.lr_final.is_none_or(|l| l > 0.0)
            && self.weights.w_d > 0.0
            && self.weights.w_a > 0.0
            && self.weights.update_rate > 0.0
            && self.weights.update_rate <= 1.0
            && self.newton_tol > 0.0
            && self.newton_max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("training configuration out of range".into()))
        }
    }

    /// Step size used in `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        match self.lr_final {
            Some(end) if self.epochs > 1 => {
                let frac = epoch as f64 / (self.epochs - 1) as f64;
                self.adam.lr * (end / self.adam.lr).powf(frac)
            }
            _ => self.adam.lr,
        }
    }
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub l_d: f64,
    pub l_a: f64,
    pub w_d: f64,
    pub w_a: f64,
    pub total: f64,
}

pub const LOG_HEADER: [&str; 6] = ["epoch", "L_d", "L_a", "w_d", "w_a", "total"];

pub fn log_to_csv(records: &[LogRecord]) -> Result<String> {
    let header: Vec<String> = LOG_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = records
        .iter()
        .map(|r| vec![r.epoch as f64, r.l_d, r.l_a, r.w_d, r.w_a, r.total]);
    let text = table::to_csv(&header, rows)?;
    // Epoch numbers are written as integers.
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let (first, rest) = line.split_once(',').unwrap_or((line, ""));
            let epoch = first.parse::<f64>().unwrap_or(0.0) as usize;
            out.push_str(&format!("{epoch},{rest}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_log(records: &[LogRecord], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, log_to_csv(records)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_format() {
        let r = LogRecord {
            epoch: 3,
            l_d: 0.5,
            l_a: 0.25,
            w_d: 1.0,
            w_a: 2.0,
            total: 1.0,
        };
        let text = log_to_csv(&[r]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,L_d,L_a,w_d,w_a,total");
        assert!(lines.next().unwrap().starts_with("3,5.0000000000000000e-1,"));
    }

    #[test]
    fn config_defaults_and_parsing() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 5, "lr": 0.01}"#).unwrap();
        assert_eq!(c.epochs, 5);
        assert_eq!(c.adam.lr, 0.01);
        assert_eq!(c.adam.beta2, 0.999);
        assert_eq!(c.tableau, "radau2");
        c.validate().unwrap();
        let bad = TrainConfig {
            lr_final: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn geometric_schedule() {
        let c = TrainConfig {
            epochs: 3,
            adam: AdamConfig { lr: 1e-2, ..Default::default() },
            lr_final: Some(1e-4),
            ..Default::default()
        };
        assert_eq!(c.learning_rate(0), 1e-2);
        assert!((c.learning_rate(1) - 1e-3).abs() < 1e-15);
        assert!((c.learning_rate(2) - 1e-4).abs() < 1e-16);
        assert_eq!(TrainConfig::default().learning_rate(500), 1e-3);
    }
}
