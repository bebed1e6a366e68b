use rayon::prelude::*;

use super::loss::{collocation_gradients, init_stages, CHUNK};
use super::{
    total_loss, update_weights, Adam, LogRecord, LossWeights, ManifoldResidual, StageVariables,
    SurrogateResidual, TrainConfig, TrainMode,
};
use crate::dae::{tableau, ButcherTableau, SamplePair, SampleSet};
use crate::error::{check_len, Error, Result};
use crate::nn::{Checkpoint, DnnModel, Mlp};
use crate::numerics::{newton_solve, LuFactor, Matrix, NewtonOptions};

#[derive(Clone, Debug)]
pub struct DynamicTrainResult {
    pub dnn: DnnModel,
    /// Final stage values per sample. In implicit-solve mode these are the
    /// Newton solutions, with `β_j = ℓ̂(α_j)` and the predicted endpoint.
    pub stages: Vec<StageVariables>,
    /// Losses and weights before each epoch's update.
    pub history: Vec<LogRecord>,
    pub weights: LossWeights,
    /// Losses after the last update.
    pub final_record: LogRecord,
}

/// Trains the DNN against the data with ℓ̂ frozen and the black-box
/// manifold residual `x_a − ℓ̂(x_d)`.
pub fn train_dynamic(
    samples: &SampleSet,
    dnn: &DnnModel,
    ell_hat: &Mlp,
    config: &TrainConfig,
) -> Result<DynamicTrainResult> {
    train_dynamic_with(samples, dnn, ell_hat, &SurrogateResidual(ell_hat), config)
}

/// As [`train_dynamic`] with an explicit manifold residual (e.g. the
/// white-box model constraint).
pub fn train_dynamic_with(
    samples: &SampleSet,
    dnn: &DnnModel,
    ell_hat: &Mlp,
    residual: &dyn ManifoldResidual,
    config: &TrainConfig,
) -> Result<DynamicTrainResult> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (n_d, n_a, m) = samples.dims();
    check_len("DNN state", dnn.n(), n_d)?;
    check_len("DNN input", dnn.n_input(), m)?;
    check_len("ℓ̂ input", ell_hat.input_dim(), n_d)?;
    check_len("ℓ̂ output", ell_hat.output_dim(), n_a)?;
    let tab = tableau(&config.tableau)?;
    match config.mode {
        TrainMode::Collocation => collocation(samples, dnn, ell_hat, residual, &tab, config),
        TrainMode::ImplicitSolve => implicit(samples, dnn, ell_hat, &tab, config),
    }
}

fn non_finite(epoch: usize, last: &DnnModel) -> Error {
    Error::NonFiniteLoss {
        epoch,
        last_finite: Box::new(Checkpoint::Dnn(last.clone())),
    }
}

fn record(epoch: usize, l_d: f64, l_a: f64, w: &LossWeights) -> LogRecord {
    LogRecord {
        epoch,
        l_d,
        l_a,
        w_d: w.w_d,
        w_a: w.w_a,
        total: total_loss(l_d, l_a, w),
    }
}

// Decision vector z = [θ, k_1, ..., k_η] with stage coordinates
// k = (v − v_init)/s, where s = Δ for the α_j (they move on the scale of
// one step) and s = 1 for β_j and x_a^{n+1}. The endpoint x_d^{n+1} stays
// pinned to the datum.
fn collocation(
    samples: &SampleSet,
    dnn: &DnnModel,
    ell_hat: &Mlp,
    residual: &dyn ManifoldResidual,
    tab: &ButcherTableau,
    config: &TrainConfig,
) -> Result<DynamicTrainResult> {
    let (n_d, n_a, _) = samples.dims();
    let nu = tab.nu;
    let flat = StageVariables::flat_len(nu, n_d, n_a);
    let pinned = nu * (n_d + n_a)..nu * (n_d + n_a) + n_d;
    let n_alpha = nu * n_d;
    let coord_scale = |i: usize, delta: f64| if i < n_alpha { delta } else { 1.0 };

    let mut stages: Vec<StageVariables> = samples
        .pairs
        .iter()
        .map(|p| init_stages(p, tab, ell_hat))
        .collect();
    let base: Vec<Vec<f64>> = stages.iter().map(StageVariables::to_flat).collect();
    let mut cur = dnn.clone();
    let n_theta = cur.n_params();
    let mut z = cur.params();
    z.resize(n_theta + samples.eta() * flat, 0.0);
    let n_z = z.len();
    let mut adam = Adam::new(config.adam, n_z);
    let mut weights = config.weights;
    let mut history = Vec::with_capacity(config.epochs);

    let scaled_grads = |g: &super::LossGradients| -> (Vec<f64>, Vec<f64>) {
        let mut gd = Vec::with_capacity(n_z);
        let mut ga = Vec::with_capacity(n_z);
        gd.extend_from_slice(&g.dnn);
        ga.resize(n_theta, 0.0);
        for (k, pair) in samples.pairs.iter().enumerate() {
            for i in 0..flat {
                let s = if pinned.contains(&i) { 0.0 } else { coord_scale(i, pair.delta) };
                gd.push(s * g.stages_d[k][i]);
                ga.push(s * g.stages_a[k][i]);
            }
        }
        (gd, ga)
    };

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        let g = collocation_gradients(samples, &stages, &cur, residual, tab)?;
        let rec = record(epoch, g.l_d, g.l_a, &weights);
        if !rec.total.is_finite() {
            return Err(non_finite(epoch, &cur));
        }
        history.push(rec);
        let (gd, ga) = scaled_grads(&g);
        let every = config.weight_update_every;
        if every > 0 && epoch > 0 && epoch % every == 0 {
            weights = update_weights(&weights, &gd, &ga);
        }
        let grad: Vec<f64> = gd
            .iter()
            .zip(&ga)
            .map(|(d, a)| weights.w_d * d + weights.w_a * a)
            .collect();
        let prev = cur.clone();
        adam.step(&mut z, &grad, lr);
        cur.set_params(&z[..n_theta])?;
        for (k, st) in stages.iter_mut().enumerate() {
            let d = samples.pairs[k].delta;
            let kz = &z[n_theta + k * flat..n_theta + (k + 1) * flat];
            let v: Vec<f64> = base[k]
                .iter()
                .zip(kz)
                .enumerate()
                .map(|(i, (b, c))| b + coord_scale(i, d) * c)
                .collect();
            *st = StageVariables::from_flat(&v, nu, n_d, n_a)?;
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(non_finite(epoch + 1, &prev));
        }
    }

    let g = collocation_gradients(samples, &stages, &cur, residual, tab)?;
    let final_record = record(config.epochs, g.l_d, g.l_a, &weights);
    if !final_record.total.is_finite() {
        return Err(non_finite(config.epochs, &cur));
    }
    Ok(DynamicTrainResult {
        dnn: cur,
        stages,
        history,
        weights,
        final_record,
    })
}

fn implicit(
    samples: &SampleSet,
    dnn: &DnnModel,
    ell_hat: &Mlp,
    tab: &ButcherTableau,
    config: &TrainConfig,
) -> Result<DynamicTrainResult> {
    let mut guesses: Vec<Vec<Vec<f64>>> = samples
        .pairs
        .iter()
        .map(|p| init_stages(p, tab, ell_hat).alpha)
        .collect();
    let mut cur = dnn.clone();
    let mut theta = cur.params();
    let mut adam = Adam::new(config.adam, theta.len());
    let weights = config.weights;
    let mut history = Vec::with_capacity(config.epochs);
    let newton = NewtonOptions::new(config.newton_tol, config.newton_max_iter);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        let (loss, grad) = implicit_loss_and_gradient(samples, &cur, tab, &mut guesses, &newton)?;
        let rec = record(epoch, loss, 0.0, &weights);
        if !rec.total.is_finite() {
            return Err(non_finite(epoch, &cur));
        }
        history.push(rec);
        let prev = cur.clone();
        adam.step(&mut theta, &grad, lr);
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(non_finite(epoch + 1, &prev));
        }
        cur.set_params(&theta)?;
    }

    let (loss, _) = implicit_loss_and_gradient(samples, &cur, tab, &mut guesses, &newton)?;
    let final_record = record(config.epochs, loss, 0.0, &weights);
    if !loss.is_finite() {
        return Err(non_finite(config.epochs, &cur));
    }
    let stages = samples
        .pairs
        .iter()
        .zip(guesses)
        .map(|(p, alpha)| {
            let xd_next = surrogate_endpoint(p, &cur, tab, &alpha);
            StageVariables {
                beta: alpha.iter().map(|a| ell_hat.eval(a)).collect(),
                xa_next: ell_hat.eval(&xd_next),
                alpha,
                xd_next,
            }
        })
        .collect();
    Ok(DynamicTrainResult {
        dnn: cur,
        stages,
        history,
        weights,
        final_record,
    })
}

fn surrogate_endpoint(
    pair: &SamplePair,
    dnn: &DnnModel,
    tab: &ButcherTableau,
    alpha: &[Vec<f64>],
) -> Vec<f64> {
    let mut x = pair.xd.clone();
    for (j, a) in alpha.iter().enumerate() {
        let f = dnn.rhs_unchecked(a, &pair.u);
        let w = pair.delta * tab.c[j];
        x.iter_mut().zip(&f).for_each(|(xi, fi)| *xi += w * fi);
    }
    x
}

fn stage_jacobian(pair: &SamplePair, dnn: &DnnModel, tab: &ButcherTableau, z: &[f64]) -> Matrix {
    let n = dnn.n();
    let nu = tab.nu;
    let mut jm = Matrix::identity(nu * n);
    for i in 0..nu {
        let jf = dnn.jacobian_unchecked(&z[i * n..(i + 1) * n]);
        for j in 0..nu {
            let w = pair.delta * tab.b[(j, i)];
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                for c in 0..n {
                    jm[(j * n + r, i * n + c)] -= w * jf[(r, c)];
                }
            }
        }
    }
    jm
}

/// Solves the surrogate stage equations `α_j = x^n + Δ Σ_i b_ji f_θ(α_i, u)`
/// by Newton from `guess`.
pub fn solve_surrogate_stages(
    pair: &SamplePair,
    dnn: &DnnModel,
    tab: &ButcherTableau,
    guess: &[Vec<f64>],
    opts: &NewtonOptions,
) -> Result<Vec<Vec<f64>>> {
    let n = dnn.n();
    let nu = tab.nu;
    check_len("x_d", pair.xd.len(), n)?;
    check_len("stage guesses", guess.len(), nu)?;
    let residual = |z: &[f64]| -> Vec<f64> {
        let f: Vec<Vec<f64>> = (0..nu)
            .map(|i| dnn.rhs_unchecked(&z[i * n..(i + 1) * n], &pair.u))
            .collect();
        let mut r = vec![0.0; nu * n];
        for j in 0..nu {
            for c in 0..n {
                r[j * n + c] = z[j * n + c] - pair.xd[c];
            }
            for (i, fi) in f.iter().enumerate() {
                let w = pair.delta * tab.b[(j, i)];
                for c in 0..n {
                    r[j * n + c] -= w * fi[c];
                }
            }
        }
        r
    };
    let jac = |z: &[f64]| stage_jacobian(pair, dnn, tab, z);
    let x0: Vec<f64> = guess.iter().flatten().copied().collect();
    let rep = newton_solve(&residual, Some(&jac), &x0, opts).map_err(|e| {
        let e = match e {
            Error::SingularMatrix { .. } => Error::IndexViolation,
            other => other,
        };
        Error::SolverFailure {
            time: pair.t,
            source: Box::new(e),
        }
    })?;
    Ok(rep.x.chunks(n.max(1)).take(nu).map(<[f64]>::to_vec).collect())
}

/// Endpoint-mismatch loss `(1/η) Σ ‖x_d^{n+1} − x̂_d^{n+1}(θ)‖²` with the
/// stages solved exactly, and its θ-gradient by the adjoint method.
/// `guesses` hold warm starts and receive the new solutions.
pub fn implicit_loss_and_gradient(
    samples: &SampleSet,
    dnn: &DnnModel,
    tab: &ButcherTableau,
    guesses: &mut [Vec<Vec<f64>>],
    opts: &NewtonOptions,
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_len("stage guesses", guesses.len(), samples.eta())?;
    let n = dnn.n();
    let nu = tab.nu;
    let n_theta = dnn.n_params();
    let scale = 1.0 / samples.eta() as f64;

    let parts: Vec<Result<(f64, Vec<f64>)>> = samples
        .pairs
        .par_chunks(CHUNK)
        .zip(guesses.par_chunks_mut(CHUNK))
        .map(|(pairs, gs)| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_theta];
            for (pair, guess) in pairs.iter().zip(gs.iter_mut()) {
                let alpha = solve_surrogate_stages(pair, dnn, tab, guess, opts)?;
                let pred = surrogate_endpoint(pair, dnn, tab, &alpha);
                let e: Vec<f64> = pred.iter().zip(&pair.xd_next).map(|(p, d)| p - d).collect();
                loss += e.iter().map(|v| v * v).sum::<f64>();
                let s: Vec<f64> = e.iter().map(|v| 2.0 * scale * v).collect();

                let mut dl_dalpha = Vec::with_capacity(nu * n);
                for (j, a) in alpha.iter().enumerate() {
                    let seed: Vec<f64> = s.iter().map(|v| pair.delta * tab.c[j] * v).collect();
                    dl_dalpha.extend(dnn.vjp(a, &seed, &mut grad));
                }
                let z: Vec<f64> = alpha.iter().flatten().copied().collect();
                let lu = LuFactor::new(&stage_jacobian(pair, dnn, tab, &z)).map_err(|_| {
                    Error::SolverFailure {
                        time: pair.t,
                        source: Box::new(Error::IndexViolation),
                    }
                })?;
                let lambda = lu.solve_transpose(&dl_dalpha)?;
                for (i, a) in alpha.iter().enumerate() {
                    let mut seed = vec![0.0; n];
                    for j in 0..nu {
                        let w = pair.delta * tab.b[(j, i)];
                        for c in 0..n {
                            seed[c] += w * lambda[j * n + c];
                        }
                    }
                    dnn.vjp(a, &seed, &mut grad);
                }
                *guess = alpha;
            }
            Ok((loss, grad))
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_theta];
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{sample_dataset, InputSignal, SolverConfig};
    use crate::nn::dnn_simulate;
    use crate::training::{loss_dynamic, AdamConfig};

    fn setup() -> (SampleSet, DnnModel, Mlp) {
        let rho = Mlp::init(&[2, 4, 2], 3).unwrap();
        let dnn = DnnModel::new(
            Matrix::from_rows(&[&[-0.8, 0.3], &[-0.2, -0.5]]),
            Matrix::from_rows(&[&[0.2, 0.1], &[-0.3, 0.2]]),
            Matrix::from_rows(&[&[1.0], &[0.5]]),
            rho,
            vec![0.05, -0.1],
            1.0,
        )
        .unwrap();
        let ell = Mlp::init(&[2, 1], 0).unwrap();
        let cfg = SolverConfig {
            newton_tol: 1e-13,
            ..SolverConfig::with_delta(0.05)
        };
        let input = InputSignal::constant(vec![0.2]);
        let tab = tableau("radau2").unwrap();
        let traj = dnn_simulate(&dnn, &ell, &[0.4, -0.3], &|t| input.eval(t), 0.3, &tab, &cfg).unwrap();
        (sample_dataset(&traj, 6, 0).unwrap(), dnn, ell)
    }

    #[test]
    fn zero_epochs_leaves_parameters() {
        let (s, dnn, ell) = setup();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let r = train_dynamic(&s, &dnn, &ell, &cfg).unwrap();
        assert!(r.history.is_empty());
        assert_eq!(r.dnn, dnn);
        assert_eq!(r.final_record.epoch, 0);
    }

    #[test]
    fn implicit_gradient_matches_fd() {
        let (s, dnn, ell) = setup();
        let tab = tableau("radau2").unwrap();
        let mut other = dnn.clone();
        let mut th = other.params();
        th.iter_mut().enumerate().for_each(|(i, v)| *v += 0.05 * (i as f64).sin());
        other.set_params(&th).unwrap();
        let opts = NewtonOptions::new(1e-13, 30);
        let init = |s: &SampleSet| -> Vec<Vec<Vec<f64>>> {
            s.pairs.iter().map(|p| init_stages(p, &tab, &ell).alpha).collect()
        };
        let (_, g) = implicit_loss_and_gradient(&s, &other, &tab, &mut init(&s), &opts).unwrap();
        let h = 1e-6;
        for i in 0..th.len() {
            let mut tp = th.clone();
            tp[i] += h;
            let mut dp = other.clone();
            dp.set_params(&tp).unwrap();
            let lp = implicit_loss_and_gradient(&s, &dp, &tab, &mut init(&s), &opts).unwrap().0;
            tp[i] -= 2.0 * h;
            dp.set_params(&tp).unwrap();
            let lm = implicit_loss_and_gradient(&s, &dp, &tab, &mut init(&s), &opts).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let sc = fd.abs().max(g[i].abs()).max(1e-9);
            assert!((fd - g[i]).abs() / sc < 1e-4, "{i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn implicit_and_collocation_losses_agree() {
        let (s, dnn, ell) = setup();
        let tab = tableau("gauss2").unwrap();
        let mut other = dnn.clone();
        let mut th = other.params();
        th[0] += 0.2;
        other.set_params(&th).unwrap();
        let opts = NewtonOptions::new(1e-14, 30);
        let mut g: Vec<_> = s.pairs.iter().map(|p| init_stages(p, &tab, &ell).alpha).collect();
        let (endpoint, _) = implicit_loss_and_gradient(&s, &other, &tab, &mut g, &opts).unwrap();
        let stages: Vec<StageVariables> = s
            .pairs
            .iter()
            .zip(&g)
            .map(|(p, a)| StageVariables {
                alpha: a.clone(),
                beta: vec![vec![0.0]; tab.nu],
                xd_next: p.xd_next.clone(),
                xa_next: vec![0.0],
            })
            .collect();
        let ld = loss_dynamic(&s, &stages, &other, &tab).unwrap();
        assert!((ld - endpoint / (tab.nu + 1) as f64).abs() < 1e-12 * endpoint.max(1e-12));
    }

    #[test]
    fn realizable_data_is_fit_exactly_by_truth() {
        let (s, dnn, ell) = setup();
        let tab = tableau("radau2").unwrap();
        let opts = NewtonOptions::new(1e-14, 30);
        let mut g: Vec<_> = s.pairs.iter().map(|p| init_stages(p, &tab, &ell).alpha).collect();
        let (endpoint, _) = implicit_loss_and_gradient(&s, &dnn, &tab, &mut g, &opts).unwrap();
        assert!(endpoint < 1e-20, "{endpoint}");
    }

    #[test]
    fn both_modes_reduce_loss() {
        let (s, dnn, ell) = setup();
        let mut start = dnn.clone();
        let mut th = start.params();
        th.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 * ((i * 5) as f64).cos());
        start.set_params(&th).unwrap();
        for mode in [TrainMode::Collocation, TrainMode::ImplicitSolve] {
            let cfg = TrainConfig {
                mode,
                epochs: 200,
                adam: AdamConfig {
                    lr: 1e-2,
                    ..Default::default()
                },
                ..Default::default()
            };
            let r = train_dynamic(&s, &start, &ell, &cfg).unwrap();
            assert_eq!(r.history.len(), 200);
            assert!(
                r.final_record.l_d < 0.5 * r.history[0].l_d,
                "{mode:?}: {} -> {}",
                r.history[0].l_d,
                r.final_record.l_d
            );
            let again = train_dynamic(&s, &start, &ell, &cfg).unwrap();
            assert_eq!(again.dnn, r.dnn);
        }
    }

    #[test]
    fn weights_update_on_schedule() {
        let (s, dnn, ell) = setup();
        let cfg = TrainConfig {
            epochs: 25,
            ..Default::default()
        };
        let r = train_dynamic(&s, &dnn, &ell, &cfg).unwrap();
        assert!(r.history[..11].iter().all(|h| h.w_a == 1.0));
        assert_ne!(r.history[11].w_a, 1.0);
        assert!(r.history.iter().all(|h| h.w_d == 1.0 && h.w_a > 0.0));
    }
}
