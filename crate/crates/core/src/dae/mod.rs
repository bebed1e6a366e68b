//! Fixed-step implicit Runge–Kutta integration of semi-explicit index-1
//! systems, trajectories and sampled training pairs.

mod input;
mod irk;
mod system;
mod tableau;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use input::InputSignal;
pub use irk::{irk_step, irk_step_at, simulate, IrkStep};
pub use system::{DaeJacobians, DaeSystem};
pub use tableau::{builtin_tableaus, tableau, ButcherTableau};
pub use trajectory::{sample_dataset, SamplePair, SampleSet, Trajectory};

use crate::error::{Error, Result};

/// Step size and tolerances. Only `delta`, `max_step` and the Newton
/// settings drive the fixed-step integrator; `rel_tol` and `abs_tol` are
/// carried for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub delta: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            rel_tol: 1e-5,
            abs_tol: 1e-6,
            max_step: 1e-3,
            newton_tol: 1e-6,
            newton_max_iter: 20,
        }
    }
}

impl SolverConfig {
    /// Default tolerances with step `delta` (and `max_step` raised to match).
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            max_step: delta.max(Self::default().max_step),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("newton_tol", self.newton_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("newton_max_iter must be at least 1".into()));
        }
        if self.delta > self.max_step * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "delta {} exceeds max_step {}",
                self.delta, self.max_step
            )));
        }
        Ok(())
    }
}
