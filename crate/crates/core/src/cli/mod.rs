//! Command implementations behind the `ndae-ident` binary.
//!
//! Every command reads and writes artifacts in `out_dir`:
//!
//! | command            | reads                          | writes |
//! |--------------------|--------------------------------|--------|
//! | `generate`         |                                | `model.json`, `trajectory_NNN.csv`, `dataset.csv` |
//! | `train algebraic`  | `dataset.csv`                  | `ell_hat.json`, `log_algebraic.csv` |
//! | `train dynamic`    | `dataset.csv`, `ell_hat.json`, `model.json` | `dnn.json`, `log_dynamic.csv` |
//! | `evaluate`         | `model.json`, `ell_hat.json`, `dnn.json` | `errors_d.csv`, `errors_a.csv`, `components_d.csv`, `components_a.csv`, `paired_series.csv`, `evaluation.json` |
//! | `certify`          | `model.json`, `dnn.json`       | `certificate.json`, `error_trace.csv` |

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    AlgebraicSection, CertifySection, DataSection, DynamicSection, EvaluateSection, InputSection,
    ModelSection, RunConfig, SolverSection,
};

use crate::certificate::{
    certify, estimate_c0_c1, riccati_candidate, simulate_error, ErrorCertificate,
};
use crate::dae::{sample_dataset, simulate, SampleSet, Trajectory};
use crate::error::Error;
use crate::model::{build_synthetic_model_with, NdaeModel};
use crate::nn::{dnn_simulate, Checkpoint, DnnModel, Mlp};
use crate::numerics::Matrix;
use crate::table;
use crate::training::{
    component_errors, mean_relative_error, relative_error_series, train_algebraic, train_dynamic,
    train_dynamic_with, write_log, ComponentError, ModelResidual, StateGroup,
};

pub const MODEL_FILE: &str = "model.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const ELL_HAT_FILE: &str = "ell_hat.json";
pub const DNN_FILE: &str = "dnn.json";
pub const LOG_ALGEBRAIC_FILE: &str = "log_algebraic.csv";
pub const LOG_DYNAMIC_FILE: &str = "log_dynamic.csv";
pub const ERRORS_D_FILE: &str = "errors_d.csv";
pub const ERRORS_A_FILE: &str = "errors_a.csv";
pub const COMPONENTS_D_FILE: &str = "components_d.csv";
pub const COMPONENTS_A_FILE: &str = "components_a.csv";
pub const PAIRED_FILE: &str = "paired_series.csv";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const ERROR_TRACE_FILE: &str = "error_trace.csv";
/// Written instead of a checkpoint when training diverges.
pub const PARTIAL_SUFFIX: &str = ".partial.json";

pub fn trajectory_file(k: usize) -> String {
    format!("trajectory_{k:03}.csv")
}

/// Offset separating the per-trajectory sampling seeds from the IC seeds.
const SAMPLE_SEED_OFFSET: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Algebraic,
    Dynamic,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("certificate infeasible (margin {margin:e}); report written to {}", .path.display())]
    Infeasible { margin: f64, path: PathBuf },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 0 ok, 1 configuration, 2 solver, 3 training, 4 missing artifact,
    /// 5 infeasible certificate.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::MissingArtifact(_) => 4,
            CliError::Infeasible { .. } => 5,
            CliError::Core(e) => match e {
                Error::SolverFailure { .. }
                | Error::NoConvergence { .. }
                | Error::IndexViolation
                | Error::SingularMatrix { .. }
                | Error::NotHurwitz
                | Error::NotPositiveDefinite { .. }
                | Error::NotSymmetric { .. } => 2,
                Error::NonFiniteLoss { .. } => 3,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 4,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Loads the configuration, or the defaults when `path` is `None`; `out`
/// overrides `out_dir`.
pub fn load_config(path: Option<&Path>, out: Option<&Path>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = out {
        cfg.out_dir = o.to_path_buf();
    }
    Ok(cfg)
}

fn artifact(cfg: &RunConfig, name: &str) -> CliResult<PathBuf> {
    let p = cfg.out_dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::MissingArtifact(p))
    }
}

fn load_model(cfg: &RunConfig) -> CliResult<NdaeModel> {
    Ok(NdaeModel::load(artifact(cfg, MODEL_FILE)?)?)
}

fn load_mlp(cfg: &RunConfig) -> CliResult<Mlp> {
    Ok(Checkpoint::load(artifact(cfg, ELL_HAT_FILE)?)?.into_mlp()?)
}

fn load_dnn(cfg: &RunConfig) -> CliResult<DnnModel> {
    Ok(Checkpoint::load(artifact(cfg, DNN_FILE)?)?.into_dnn()?)
}

fn load_samples(cfg: &RunConfig) -> CliResult<SampleSet> {
    Ok(SampleSet::read_csv(artifact(cfg, DATASET_FILE)?)?)
}

/// Saves the last finite checkpoint next to `name` and passes the error on.
fn save_partial(cfg: &RunConfig, name: &str, err: Error) -> CliError {
    if let Error::NonFiniteLoss { last_finite, .. } = &err {
        let stem = name.trim_end_matches(".json");
        let _ = last_finite.save(cfg.out_dir.join(format!("{stem}{PARTIAL_SUFFIX}")));
    }
    CliError::Core(err)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateReport {
    pub trajectories: usize,
    pub points: usize,
    pub eta: usize,
    pub index1_margin: f64,
}

impl fmt::Display for GenerateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "generated {} trajectories ({} points), {} sample pairs\nindex1_margin {}",
            self.trajectories,
            self.points,
            self.eta,
            table::fmt_num(self.index1_margin)
        )
    }
}

/// Builds the synthetic model, simulates the training trajectories and
/// draws the dataset.
pub fn generate(cfg: &RunConfig) -> CliResult<GenerateReport> {
    let model = build_synthetic_model_with(cfg.model.n_gen, cfg.model.seed, &cfg.model.options)?;
    let tab = cfg.tableau()?;
    let signal = cfg.data.input.signal(model.m);
    let input = |t: f64| signal.eval(t);
    let ics = cfg.data.initial_conditions(model.n_d);

    let trajectories = ics
        .par_iter()
        .map(|x0| simulate(&model, x0, &input, cfg.data.t_end, &tab, &cfg.solver.config))
        .collect::<crate::Result<Vec<Trajectory>>>()?;

    let mut data = SampleSet::new(Vec::new());
    for (k, traj) in trajectories.iter().enumerate() {
        let seed = cfg.data.seed.wrapping_add(SAMPLE_SEED_OFFSET + k as u64);
        data.extend(sample_dataset(traj, cfg.data.eta_for(k), seed)?);
    }

    let index1_margin = trajectories
        .par_iter()
        .map(|traj| {
            let points: Vec<(Vec<f64>, Vec<f64>)> = traj
                .states_d
                .iter()
                .cloned()
                .zip(traj.states_a.iter().cloned())
                .collect();
            model.index1_margin(&points)
        })
        .collect::<crate::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    fs::create_dir_all(&cfg.out_dir).map_err(Error::from)?;
    model.save(cfg.out_dir.join(MODEL_FILE))?;
    for (k, traj) in trajectories.iter().enumerate() {
        traj.write_csv(cfg.out_dir.join(trajectory_file(k)))?;
    }
    data.write_csv(cfg.out_dir.join(DATASET_FILE))?;

    Ok(GenerateReport {
        trajectories: trajectories.len(),
        points: trajectories.iter().map(Trajectory::len).sum(),
        eta: data.eta(),
        index1_margin,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub phase: Phase,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.phase {
            Phase::Algebraic => "algebraic",
            Phase::Dynamic => "dynamic",
        };
        write!(
            f,
            "{name} phase: {} epochs, loss {} -> {}",
            self.epochs,
            table::fmt_num(self.initial_loss),
            table::fmt_num(self.final_loss)
        )
    }
}

pub fn train(cfg: &RunConfig, phase: Phase) -> CliResult<TrainReport> {
    match phase {
        Phase::Algebraic => train_algebraic_phase(cfg),
        Phase::Dynamic => train_dynamic_phase(cfg),
    }
}

fn train_algebraic_phase(cfg: &RunConfig) -> CliResult<TrainReport> {
    let samples = load_samples(cfg)?;
    let (n_d, n_a, _) = samples.dims();
    let sec = &cfg.algebraic;
    let sizes: Vec<usize> = std::iter::once(n_d)
        .chain(sec.hidden.iter().copied())
        .chain(std::iter::once(n_a))
        .collect();
    let net = Mlp::init(&sizes, sec.train.seed)?;
    let res = train_algebraic(&samples, &net, &sec.train)
        .map_err(|e| save_partial(cfg, ELL_HAT_FILE, e))?;
    Checkpoint::Mlp(res.net).save(cfg.out_dir.join(ELL_HAT_FILE))?;
    write_log(&res.history, cfg.out_dir.join(LOG_ALGEBRAIC_FILE))?;
    Ok(TrainReport {
        phase: Phase::Algebraic,
        epochs: sec.train.epochs,
        initial_loss: res.history.first().map_or(res.best_loss, |r| r.total),
        final_loss: res.best_loss,
    })
}

fn train_dynamic_phase(cfg: &RunConfig) -> CliResult<TrainReport> {
    let samples = load_samples(cfg)?;
    let ell_hat = load_mlp(cfg)?;
    let model = load_model(cfg)?;
    let sec = &cfg.dynamic;
    let dnn = DnnModel::for_model(&model, &sec.rho_hidden, sec.train.seed)?;
    let res = if sec.white_box {
        train_dynamic_with(&samples, &dnn, &ell_hat, &ModelResidual(&model), &sec.train)
    } else {
        train_dynamic(&samples, &dnn, &ell_hat, &sec.train)
    }
    .map_err(|e| save_partial(cfg, DNN_FILE, e))?;
    Checkpoint::Dnn(res.dnn).save(cfg.out_dir.join(DNN_FILE))?;
    let mut log = res.history.clone();
    log.push(res.final_record);
    write_log(&log, cfg.out_dir.join(LOG_DYNAMIC_FILE))?;
    Ok(TrainReport {
        phase: Phase::Dynamic,
        epochs: sec.train.epochs,
        initial_loss: log[0].total,
        final_loss: res.final_record.total,
    })
}

/// Summary written to `evaluation.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x0: Vec<f64>,
    pub t_end: f64,
    /// Means over the defined entries, in percent.
    pub mean_e_d: Option<f64>,
    pub mean_e_a: Option<f64>,
    /// Components with the smallest and largest RMSE.
    pub argmin_d: usize,
    pub argmax_d: usize,
    pub argmin_a: usize,
    pub argmax_a: usize,
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "undefined".into(), |v| format!("{v:.4}%"));
        write!(
            f,
            "held-out mean relative error: x_d {}, x_a {}\nbest/worst x_d component {}/{}, x_a component {}/{}",
            pct(self.mean_e_d),
            pct(self.mean_e_a),
            self.argmin_d,
            self.argmax_d,
            self.argmin_a,
            self.argmax_a
        )
    }
}

fn arg_extrema(errs: &[ComponentError]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, e) in errs.iter().enumerate() {
        if e.rmse < errs[lo].rmse {
            lo = i;
        }
        if e.rmse > errs[hi].rmse {
            hi = i;
        }
    }
    (lo, hi)
}

fn write_series(path: &Path, name: &str, times: &[f64], values: &[f64]) -> crate::Result<()> {
    let header = vec!["t".to_string(), name.to_string()];
    let rows = times.iter().zip(values).map(|(&t, &v)| vec![t, v]);
    fs::write(path, table::to_csv(&header, rows)?)?;
    Ok(())
}

fn write_components(path: &Path, errs: &[ComponentError]) -> crate::Result<()> {
    let header: Vec<String> = ["index", "rmse", "max_abs"].iter().map(|s| s.to_string()).collect();
    let rows = errs.iter().map(|e| vec![e.index as f64, e.rmse, e.max_abs]);
    fs::write(path, table::to_csv(&header, rows)?)?;
    Ok(())
}

/// Compares the identified model against the truth from the held-out
/// initial condition.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Evaluation> {
    let model = load_model(cfg)?;
    let ell_hat = load_mlp(cfg)?;
    let dnn = load_dnn(cfg)?;
    let tab = cfg.tableau()?;
    let signal = cfg.data.input.signal(model.m);
    let input = |t: f64| signal.eval(t);
    let x0 = cfg.data.held_out_condition(model.n_d);
    let t_end = cfg.evaluate.t_end;

    let truth = simulate(&model, &x0, &input, t_end, &tab, &cfg.solver.config)?;
    let pred = dnn_simulate(&dnn, &ell_hat, &x0, &input, t_end, &tab, &cfg.solver.config)?;

    let e_d = relative_error_series(&truth, &pred, StateGroup::Dynamic)?;
    let e_a = relative_error_series(&truth, &pred, StateGroup::Algebraic)?;
    let comp_d = component_errors(&truth, &pred, StateGroup::Dynamic)?;
    let comp_a = component_errors(&truth, &pred, StateGroup::Algebraic)?;
    let (argmin_d, argmax_d) = arg_extrema(&comp_d);
    let (argmin_a, argmax_a) = arg_extrema(&comp_a);

    let out = &cfg.out_dir;
    write_series(&out.join(ERRORS_D_FILE), "e_d_r", &truth.times, &e_d)?;
    write_series(&out.join(ERRORS_A_FILE), "e_a_r", &truth.times, &e_a)?;
    write_components(&out.join(COMPONENTS_D_FILE), &comp_d)?;
    write_components(&out.join(COMPONENTS_A_FILE), &comp_a)?;

    let header: Vec<String> = [
        "t".to_string(),
        format!("true_x_d_{argmin_d}"),
        format!("pred_x_d_{argmin_d}"),
        format!("true_x_d_{argmax_d}"),
        format!("pred_x_d_{argmax_d}"),
    ]
    .into();
    let rows = (0..truth.len()).map(|n| {
        vec![
            truth.times[n],
            truth.states_d[n][argmin_d],
            pred.states_d[n][argmin_d],
            truth.states_d[n][argmax_d],
            pred.states_d[n][argmax_d],
        ]
    });
    fs::write(out.join(PAIRED_FILE), table::to_csv(&header, rows)?).map_err(Error::from)?;

    let report = Evaluation {
        x0,
        t_end,
        mean_e_d: mean_relative_error(&e_d),
        mean_e_a: mean_relative_error(&e_a),
        argmin_d,
        argmax_d,
        argmin_a,
        argmax_a,
    };
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    fs::write(out.join(EVALUATION_FILE), json).map_err(Error::from)?;
    Ok(report)
}

impl fmt::Display for ErrorCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c0 {} c1 {}\nbound {} ({})",
            table::fmt_num(self.c0),
            table::fmt_num(self.c1),
            table::fmt_num(self.bound),
            if self.feasible { "feasible" } else { "infeasible, not binding" }
        )?;
        if let Some(t) = self.tail_max {
            write!(f, "\nsimulated tail max {}", table::fmt_num(t))?;
        }
        Ok(())
    }
}

/// Simulates the error system from the first training initial condition,
/// estimates the constants on the visited states and writes the
/// certificate. An infeasible certificate is still written, then reported
/// as [`CliError::Infeasible`].
pub fn certify_run(cfg: &RunConfig) -> CliResult<ErrorCertificate> {
    let model = load_model(cfg)?;
    let dnn = load_dnn(cfg)?;
    let tab = cfg.tableau()?;
    let c = &cfg.certify;
    let n = model.n_d;
    let eye = Matrix::identity(n);
    let a = eye.scale(-c.a_scale);
    let l = eye.scale(c.l_scale);
    let k = eye.scale(c.k_scale);
    let w = eye.scale(c.w_scale);

    let signal = cfg.data.input.signal(model.m);
    let input = |t: f64| signal.eval(t);
    let mut rng_ics = cfg.data.clone();
    rng_ics.trajectories = 1;
    let x0 = rng_ics.initial_conditions(n).remove(0);
    let trace = simulate_error(
        &model,
        &dnn,
        &a,
        &x0,
        &vec![0.0; n],
        &input,
        c.t_end,
        &tab,
        &cfg.solver.config,
    )?;
    let cloud = trace.cloud(c.cloud_stride);

    let (_, c1) = estimate_c0_c1(&model, &dnn, &a, &l, &k, &cloud)?;
    let p = match riccati_candidate(&a, &l, &k, &w.scale(1.0 + c.riccati_slack), c1) {
        Ok(p) => p,
        Err(Error::NotHurwitz | Error::NoConvergence { .. } | Error::NotPositiveDefinite { .. }) => {
            eye.clone()
        }
        Err(e) => return Err(e.into()),
    };
    let mut cert = certify(&model, &dnn, &a, &l, &k, &p, &w, &cloud)?;
    cert.attach(&trace);

    let path = cfg.out_dir.join(CERTIFICATE_FILE);
    cert.save(&path)?;
    let header = vec!["t".to_string(), "e_norm".to_string()];
    let rows = trace.times.iter().zip(&trace.error_norms).map(|(&t, &v)| vec![t, v]);
    fs::write(cfg.out_dir.join(ERROR_TRACE_FILE), table::to_csv(&header, rows)?)
        .map_err(Error::from)?;

    if cert.feasible {
        Ok(cert)
    } else {
        Err(CliError::Infeasible {
            margin: cert.margin,
            path,
        })
    }
}
