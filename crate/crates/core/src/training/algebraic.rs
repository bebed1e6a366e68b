use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::CHUNK;
use super::{Adam, LogRecord, TrainConfig};
use crate::dae::SampleSet;
use crate::error::{check_len, Error, Result};
use crate::nn::{Checkpoint, Mlp};

#[derive(Clone, Debug)]
pub struct AlgebraicTrainResult {
    /// Parameters with the lowest full-data loss seen.
    pub net: Mlp,
    /// Full-data loss before each epoch's updates.
    pub history: Vec<LogRecord>,
    pub best_loss: f64,
}

/// `(1/η) Σ ‖x_a − ℓ̂(x_d)‖²`.
pub fn mse_algebraic(samples: &SampleSet, net: &Mlp) -> Result<f64> {
    check(samples, net)?;
    let idx: Vec<usize> = (0..samples.eta()).collect();
    Ok(loss_and_grad(samples, net, &idx, false).0)
}

fn check(samples: &SampleSet, net: &Mlp) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (n_d, n_a, _) = samples.dims();
    check_len("ℓ̂ input", net.input_dim(), n_d)?;
    check_len("ℓ̂ output", net.output_dim(), n_a)
}

fn loss_and_grad(samples: &SampleSet, net: &Mlp, idx: &[usize], grad: bool) -> (f64, Vec<f64>) {
    let n_p = if grad { net.n_params() } else { 0 };
    let scale = 1.0 / idx.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut g = vec![0.0; n_p];
            for &k in chunk {
                let p = &samples.pairs[k];
                let out = net.eval(&p.xd);
                let r: Vec<f64> = out.iter().zip(&p.xa).map(|(o, a)| o - a).collect();
                loss += r.iter().map(|v| v * v).sum::<f64>();
                if grad {
                    let seed: Vec<f64> = r.iter().map(|v| 2.0 * scale * v).collect();
                    net.backprop(&seed, &p.xd, &mut g);
                }
            }
            (loss, g)
        })
        .collect();
    let mut loss = 0.0;
    let mut g = vec![0.0; n_p];
    for (l, pg) in parts {
        loss += l;
        g.iter_mut().zip(&pg).for_each(|(a, b)| *a += b);
    }
    (loss * scale, g)
}

/// Fits ℓ̂ to `x_a ≈ ℓ̂(x_d)` with Adam. Returns the best iterate, so the
/// reported loss never exceeds the initial one.
pub fn train_algebraic(
    samples: &SampleSet,
    net: &Mlp,
    config: &TrainConfig,
) -> Result<AlgebraicTrainResult> {
    check(samples, net)?;
    config.validate()?;
    let eta = samples.eta();
    let all: Vec<usize> = (0..eta).collect();
    let batch = if config.batch_size == 0 || config.batch_size >= eta {
        eta
    } else {
        config.batch_size
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = all.clone();

    let mut cur = net.clone();
    let mut theta = cur.params();
    let mut adam = Adam::new(config.adam, theta.len());
    let mut best = (f64::INFINITY, cur.clone());
    let mut last_finite = cur.clone();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        let (full, full_grad) = loss_and_grad(samples, &cur, &all, batch == eta);
        if !full.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                last_finite: Box::new(Checkpoint::Mlp(last_finite)),
            });
        }
        last_finite = cur.clone();
        if full < best.0 {
            best = (full, cur.clone());
        }
        history.push(LogRecord {
            epoch,
            l_d: 0.0,
            l_a: full,
            w_d: 0.0,
            w_a: 1.0,
            total: full,
        });
        if batch == eta {
            adam.step(&mut theta, &full_grad, lr);
            cur.set_params(&theta)?;
        } else {
            order.shuffle(&mut rng);
            for idx in order.chunks(batch) {
                let (_, g) = loss_and_grad(samples, &cur, idx, true);
                adam.step(&mut theta, &g, lr);
                cur.set_params(&theta)?;
            }
        }
    }

    let (last, _) = loss_and_grad(samples, &cur, &all, false);
    if !last.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
            last_finite: Box::new(Checkpoint::Mlp(last_finite)),
        });
    }
    if last < best.0 {
        best = (last, cur);
    }
    Ok(AlgebraicTrainResult {
        net: best.1,
        history,
        best_loss: best.0,
    })
}
