use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dae::{tableau, ButcherTableau, InputSignal, SolverConfig};
use crate::error::{Error, Result};
use crate::model::SyntheticOptions;
use crate::training::{AdamConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub n_gen: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub options: SyntheticOptions,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n_gen: 3,
            seed: 0,
            options: SyntheticOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub tableau: String,
    #[serde(flatten)]
    pub config: SolverConfig,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tableau: "radau2".into(),
            config: SolverConfig::default(),
        }
    }
}

/// Excitation `u_k(t) = offset + amplitude·sin(2π·frequency·t + k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputSection {
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            offset: 0.0,
            amplitude: 0.5,
            frequency: 1.0,
        }
    }
}

impl InputSection {
    pub fn signal(&self, m: usize) -> InputSignal {
        InputSignal {
            offset: vec![self.offset; m],
            amplitude: vec![self.amplitude; m],
            frequency: self.frequency,
            phase: (0..m).map(|k| k as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub t_end: f64,
    /// Training trajectories, each from a random initial condition.
    pub trajectories: usize,
    /// Total sample pairs across all trajectories.
    pub eta: usize,
    /// Initial conditions are drawn from `U(−ic_scale, ic_scale)`.
    pub ic_scale: f64,
    pub seed: u64,
    pub input: InputSection,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            t_end: 2.0,
            trajectories: 16,
            eta: 1000,
            ic_scale: 1.0,
            seed: 0,
            input: InputSection::default(),
        }
    }
}

impl DataSection {
    /// Training initial conditions, drawn from `seed`.
    pub fn initial_conditions(&self, n_d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.trajectories)
            .map(|_| self.draw(&mut rng, n_d))
            .collect()
    }

    /// Held-out initial condition, drawn from `seed + 1`.
    pub fn held_out_condition(&self, n_d: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        self.draw(&mut rng, n_d)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n_d: usize) -> Vec<f64> {
        (0..n_d)
            .map(|_| self.ic_scale * rng.gen_range(-1.0..=1.0))
            .collect()
    }

    /// Pairs drawn from trajectory `k`; the remainder goes to the first ones.
    pub fn eta_for(&self, k: usize) -> usize {
        let base = self.eta / self.trajectories;
        base + usize::from(k < self.eta % self.trajectories)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgebraicSection {
    pub hidden: Vec<usize>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for AlgebraicSection {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            train: TrainConfig {
                epochs: 3000,
                adam: AdamConfig {
                    lr: 1e-2,
                    ..Default::default()
                },
                lr_final: Some(1e-4),
                seed: 1,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicSection {
    pub rho_hidden: Vec<usize>,
    /// Penalize the true constraint instead of `x_a − ℓ̂(x_d)`.
    pub white_box: bool,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for DynamicSection {
    fn default() -> Self {
        Self {
            rho_hidden: vec![32],
            white_box: false,
            train: TrainConfig {
                epochs: 3000,
                adam: AdamConfig {
                    lr: 3e-2,
                    ..Default::default()
                },
                lr_final: Some(3e-4),
                seed: 2,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub t_end: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { t_end: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifySection {
    /// `A = −a_scale·I`.
    pub a_scale: f64,
    pub w_scale: f64,
    pub l_scale: f64,
    pub k_scale: f64,
    /// Relative slack on `W` when solving for the candidate `P`.
    pub riccati_slack: f64,
    /// Horizon of the error simulation.
    pub t_end: f64,
    /// Every `cloud_stride`-th point of the error simulation joins the cloud.
    pub cloud_stride: usize,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            a_scale: 1.0,
            w_scale: 0.1,
            l_scale: 1.0,
            k_scale: 1.0,
            riccati_slack: 0.01,
            t_end: 5.0,
            cloud_stride: 10,
        }
    }
}

/// Whole-pipeline configuration; every section is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub solver: SolverSection,
    pub data: DataSection,
    pub algebraic: AlgebraicSection,
    pub dynamic: DynamicSection,
    pub evaluate: EvaluateSection,
    pub certify: CertifySection,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSection::default(),
            solver: SolverSection::default(),
            data: DataSection::default(),
            algebraic: AlgebraicSection::default(),
            dynamic: DynamicSection::default(),
            evaluate: EvaluateSection::default(),
            certify: CertifySection::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: &str) -> Error {
    Error::InvalidArgument(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.n_gen == 0 {
            return Err(invalid("model.n_gen must be at least 1"));
        }
        self.solver.config.validate()?;
        tableau(&self.solver.tableau)?;
        let d = &self.data;
        if !(d.t_end > 0.0) || d.trajectories == 0 || d.eta == 0 || !(d.ic_scale >= 0.0) {
            return Err(invalid("data section needs t_end > 0, trajectories >= 1, eta >= 1"));
        }
        if !d.input.frequency.is_finite() || !d.input.amplitude.is_finite() {
            return Err(invalid("data.input must be finite"));
        }
        self.algebraic.train.validate()?;
        self.dynamic.train.validate()?;
        tableau(&self.dynamic.train.tableau)?;
        if !(self.evaluate.t_end > 0.0) {
            return Err(invalid("evaluate.t_end must be positive"));
        }
        let c = &self.certify;
        let ok = c.a_scale > 0.0
            && c.w_scale > 0.0
            && c.l_scale > 0.0
            && c.k_scale > 0.0
            && c.riccati_slack >= 0.0
            && c.t_end > 0.0
            && c.cloud_stride > 0;
        if !ok {
            return Err(invalid("certify section values must be positive"));
        }
        Ok(())
    }

    pub fn tableau(&self) -> Result<ButcherTableau> {
        tableau(&self.solver.tableau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model.n_gen, 3);
        assert_eq!(c.algebraic.train.epochs, 3000);
        assert_eq!(c.dynamic.train.adam.lr, 3e-2);
        assert_eq!(c.solver.config.abs_tol, 1e-6);
    }

    #[test]
    fn sections_override_and_validate() {
        let c = RunConfig::from_json(
            r#"{"model": {"n_gen": 1, "coupling": 0.0},
                "solver": {"delta": 0.01, "max_step": 0.01},
                "dynamic": {"epochs": 3, "mode": "implicit_solve"},
                "out_dir": "x"}"#,
        )
        .unwrap();
        assert_eq!(c.model.options.coupling, 0.0);
        assert_eq!(c.solver.config.delta, 0.01);
        assert_eq!(c.dynamic.train.epochs, 3);
        assert_eq!(c.dynamic.rho_hidden, vec![32]);
        assert_eq!(c.out_dir, PathBuf::from("x"));
        assert!(RunConfig::from_json(r#"{"model": {"n_gen": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"solver": {"tableau": "rk4"}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"data": {"eta": 0}}"#).is_err());
    }

    #[test]
    fn initial_conditions_are_seeded() {
        let d = DataSection::default();
        let a = d.initial_conditions(4);
        assert_eq!(a, d.initial_conditions(4));
        assert_eq!(a.len(), 16);
        assert!(a.iter().flatten().all(|v| v.abs() <= 1.0));
        assert!(!a.contains(&d.held_out_condition(4)));
        let total: usize = (0..d.trajectories).map(|k| d.eta_for(k)).sum();
        assert_eq!(total, d.eta);
    }
}
