use rayon::prelude::*;

use crate::dae::{ButcherTableau, DaeSystem, SamplePair, SampleSet};
use crate::error::{check_len, Error, Result};
use crate::model::NdaeModel;
use crate::nn::{DnnModel, Mlp};
use crate::numerics::norm;

/// Samples per parallel work unit; partial sums are combined in chunk order
/// so results do not depend on the thread count.
pub(crate) const CHUNK: usize = 32;

/// Distance of a point from the algebraic manifold.
pub trait ManifoldResidual: Sync {
    fn n_dyn(&self) -> usize;
    fn n_alg(&self) -> usize;

    /// Trainable parameters behind the residual (0 for a fixed model).
    fn n_params(&self) -> usize {
        0
    }

    fn residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64>;

    /// Vector-Jacobian product of `seedᵀ·residual`: adds parameter gradients
    /// into `grad` and returns the gradients w.r.t. `x_d` and `x_a`.
    fn vjp(&self, xd: &[f64], xa: &[f64], seed: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>);
}

/// Black-box residual `x_a − ℓ̂(x_d)`.
pub struct SurrogateResidual<'a>(pub &'a Mlp);

impl ManifoldResidual for SurrogateResidual<'_> {
    fn n_dyn(&self) -> usize {
        self.0.input_dim()
    }

    fn n_alg(&self) -> usize {
        self.0.output_dim()
    }

    fn n_params(&self) -> usize {
        self.0.n_params()
    }

    fn residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        let l = self.0.eval(xd);
        xa.iter().zip(&l).map(|(a, b)| a - b).collect()
    }

    fn vjp(&self, xd: &[f64], _xa: &[f64], seed: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let neg: Vec<f64> = seed.iter().map(|s| -s).collect();
        let gxd = self.0.backprop(&neg, xd, grad);
        (gxd, seed.to_vec())
    }
}

/// White-box residual `g̃(x_d, x_a)` of a known model.
pub struct ModelResidual<'a>(pub &'a NdaeModel);

impl ManifoldResidual for ModelResidual<'_> {
    fn n_dyn(&self) -> usize {
        self.0.n_dyn()
    }

    fn n_alg(&self) -> usize {
        self.0.n_alg()
    }

    fn residual(&self, xd: &[f64], xa: &[f64]) -> Vec<f64> {
        self.0.algebraic_residual(xd, xa)
    }

    fn vjp(&self, xd: &[f64], xa: &[f64], seed: &[f64], _grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let u = vec![0.0; self.0.n_input()];
        let j = self.0.jacobians(xd, xa, &u);
        let gxd = j.ga_xd.matvec_t(seed).expect("sized");
        let gxa = j.ga_xa.matvec_t(seed).expect("sized");
        (gxd, gxa)
    }
}

/// Per-sample stage values: `α_j`, `β_j` and the step endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct StageVariables {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub xd_next: Vec<f64>,
    pub xa_next: Vec<f64>,
}

impl StageVariables {
    pub fn nu(&self) -> usize {
        self.alpha.len()
    }

    /// Flat length: `ν(n_d+n_a) + n_d + n_a`.
    pub fn flat_len(nu: usize, n_d: usize, n_a: usize) -> usize {
        (nu + 1) * (n_d + n_a)
    }

    /// `[α_1..α_ν, β_1..β_ν, x_d^{n+1}, x_a^{n+1}]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.alpha.iter().for_each(|a| v.extend_from_slice(a));
        self.beta.iter().for_each(|b| v.extend_from_slice(b));
        v.extend_from_slice(&self.xd_next);
        v.extend_from_slice(&self.xa_next);
        v
    }

    pub fn from_flat(flat: &[f64], nu: usize, n_d: usize, n_a: usize) -> Result<Self> {
        check_len("stage vector", flat.len(), Self::flat_len(nu, n_d, n_a))?;
        let off_beta = nu * n_d;
        let off_end = nu * (n_d + n_a);
        Ok(Self {
            alpha: (0..nu).map(|j| flat[j * n_d..(j + 1) * n_d].to_vec()).collect(),
            beta: (0..nu)
                .map(|j| flat[off_beta + j * n_a..off_beta + (j + 1) * n_a].to_vec())
                .collect(),
            xd_next: flat[off_end..off_end + n_d].to_vec(),
            xa_next: flat[off_end + n_d..].to_vec(),
        })
    }
}

/// Stage initialization: `α_j` on the chord `x^n + rowsum_j·(x^{n+1} − x^n)`,
/// `β_j = ℓ̂(α_j)` and the endpoint at the datum.
pub fn init_stages(pair: &SamplePair, tableau: &ButcherTableau, ell_hat: &Mlp) -> StageVariables {
    let rows = tableau.row_sums();
    let alpha: Vec<Vec<f64>> = rows
        .iter()
        .map(|&s| {
            pair.xd
                .iter()
                .zip(&pair.xd_next)
                .map(|(a, b)| a + s * (b - a))
                .collect()
        })
        .collect();
    let beta = alpha.iter().map(|a| ell_hat.eval(a)).collect();
    StageVariables {
        alpha,
        beta,
        xd_next: pair.xd_next.clone(),
        xa_next: pair.xa_next.clone(),
    }
}

/// Loss values and gradients of the collocation penalties.
///
/// Stage gradients are per sample in the [`StageVariables::to_flat`] layout.
#[derive(Clone, Debug)]
pub struct LossGradients {
    pub l_d: f64,
    pub l_a: f64,
    /// ∂L_d/∂θ (DNN parameters).
    pub dnn: Vec<f64>,
    /// ∂L_a/∂ (residual parameters, e.g. ℓ̂).
    pub manifold: Vec<f64>,
    pub stages_d: Vec<Vec<f64>>,
    pub stages_a: Vec<Vec<f64>>,
}

fn check_inputs(
    samples: &SampleSet,
    stages: &[StageVariables],
    dnn: &DnnModel,
    residual: Option<&dyn ManifoldResidual>,
    tableau: &ButcherTableau,
) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_len("stage sets", stages.len(), samples.eta())?;
    let (n_d, n_a, m) = samples.dims();
    check_len("DNN state", dnn.n(), n_d)?;
    check_len("DNN input", dnn.n_input(), m)?;
    if let Some(r) = residual {
        check_len("manifold x_d", r.n_dyn(), n_d)?;
        check_len("manifold x_a", r.n_alg(), n_a)?;
    }
    for s in stages {
        check_len("stages", s.nu(), tableau.nu)?;
        let ok = s.alpha.iter().all(|a| a.len() == n_d)
            && s.beta.len() == tableau.nu
            && s.beta.iter().all(|b| b.len() == n_a)
            && s.xd_next.len() == n_d
            && s.xa_next.len() == n_a;
        if !ok {
            return Err(Error::dims("stage variable sizes"));
        }
    }
    Ok(())
}

/// Stage residuals `r_j` (j ≤ ν) and the endpoint residual `r_{ν+1}`.
fn stage_residuals(
    pair: &SamplePair,
    st: &StageVariables,
    dnn: &DnnModel,
    tableau: &ButcherTableau,
) -> Vec<Vec<f64>> {
    let nu = tableau.nu;
    let f: Vec<Vec<f64>> = st.alpha.iter().map(|a| dnn.rhs_unchecked(a, &pair.u)).collect();
    let d = pair.delta;
    let mut res = Vec::with_capacity(nu + 1);
    for j in 0..=nu {
        let (target, coeffs): (&[f64], Vec<f64>) = if j < nu {
            (&st.alpha[j], tableau.b.row(j).to_vec())
        } else {
            (&st.xd_next, tableau.c.clone())
        };
        let mut r: Vec<f64> = pair.xd.iter().zip(target).map(|(x, t)| x - t).collect();
        for (i, fi) in f.iter().enumerate() {
            let w = d * coeffs[i];
            if w != 0.0 {
                r.iter_mut().zip(fi).for_each(|(ri, v)| *ri += w * v);
            }
        }
        res.push(r);
    }
    res
}

fn sum_sq(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().map(|v| v * v).sum()
}

fn manifold_norms(st: &StageVariables, residual: &dyn ManifoldResidual) -> f64 {
    let mut s: f64 = st
        .alpha
        .iter()
        .zip(&st.beta)
        .map(|(a, b)| norm(&residual.residual(a, b)))
        .sum();
    s += norm(&residual.residual(&st.xd_next, &st.xa_next));
    s
}

fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n).step_by(CHUNK).map(|s| s..(s + CHUNK).min(n)).collect()
}

/// `L_d = 1/(η(ν+1)) Σ_n Σ_{j≤ν+1} ‖r_j‖²`.
pub fn loss_dynamic(
    samples: &SampleSet,
    stages: &[StageVariables],
    dnn: &DnnModel,
    tableau: &ButcherTableau,
) -> Result<f64> {
    check_inputs(samples, stages, dnn, None, tableau)?;
    let parts: Vec<f64> = chunk_ranges(samples.eta())
        .into_par_iter()
        .map(|r| {
            r.map(|k| sum_sq(&stage_residuals(&samples.pairs[k], &stages[k], dnn, tableau)))
                .sum()
        })
        .collect();
    let scale = 1.0 / (samples.eta() as f64 * (tableau.nu + 1) as f64);
    Ok(scale * parts.iter().sum::<f64>())
}

/// `L_a = 1/(η(ν+1)) Σ_n (Σ_j ‖res(α_j,β_j)‖ + ‖res(x_d^{n+1},x_a^{n+1})‖)`.
pub fn loss_algebraic(
    samples: &SampleSet,
    stages: &[StageVariables],
    residual: &dyn ManifoldResidual,
    tableau: &ButcherTableau,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_len("stage sets", stages.len(), samples.eta())?;
    let (n_d, n_a, _) = samples.dims();
    check_len("manifold x_d", residual.n_dyn(), n_d)?;
    check_len("manifold x_a", residual.n_alg(), n_a)?;
    let parts: Vec<f64> = chunk_ranges(samples.eta())
        .into_par_iter()
        .map(|r| r.map(|k| manifold_norms(&stages[k], residual)).sum())
        .collect();
    let scale = 1.0 / (samples.eta() as f64 * (tableau.nu + 1) as f64);
    Ok(scale * parts.iter().sum::<f64>())
}

struct Partial {
    l_d: f64,
    l_a: f64,
    dnn: Vec<f64>,
    manifold: Vec<f64>,
    stages_d: Vec<Vec<f64>>,
    stages_a: Vec<Vec<f64>>,
}

/// Values and exact gradients of `L_d` and `L_a` w.r.t. the DNN parameters,
/// the residual parameters and every stage variable.
pub fn collocation_gradients(
    samples: &SampleSet,
    stages: &[StageVariables],
    dnn: &DnnModel,
    residual: &dyn ManifoldResidual,
    tableau: &ButcherTableau,
) -> Result<LossGradients> {
    check_inputs(samples, stages, dnn, Some(residual), tableau)?;
    let (n_d, n_a, _) = samples.dims();
    let nu = tableau.nu;
    let scale = 1.0 / (samples.eta() as f64 * (nu + 1) as f64);
    let n_theta = dnn.n_params();
    let n_phi = residual.n_params();
    let flat = StageVariables::flat_len(nu, n_d, n_a);
    let off_beta = nu * n_d;
    let off_end = nu * (n_d + n_a);

    let parts: Vec<Partial> = chunk_ranges(samples.eta())
        .into_par_iter()
        .map(|range| {
            let mut p = Partial {
                l_d: 0.0,
                l_a: 0.0,
                dnn: vec![0.0; n_theta],
                manifold: vec![0.0; n_phi],
                stages_d: Vec::with_capacity(range.len()),
                stages_a: Vec::with_capacity(range.len()),
            };
            for k in range {
                let pair = &samples.pairs[k];
                let st = &stages[k];
                let d = pair.delta;

                let res = stage_residuals(pair, st, dnn, tableau);
                p.l_d += sum_sq(&res);
                let dr: Vec<Vec<f64>> = res
                    .iter()
                    .map(|r| r.iter().map(|v| 2.0 * scale * v).collect())
                    .collect();
                let mut gs = vec![0.0; flat];
                for j in 0..nu {
                    for c in 0..n_d {
                        gs[j * n_d + c] -= dr[j][c];
                    }
                }
                for c in 0..n_d {
                    gs[off_end + c] -= dr[nu][c];
                }
                for i in 0..nu {
                    let mut g = vec![0.0; n_d];
                    for (j, drj) in dr.iter().enumerate().take(nu) {
                        let w = d * tableau.b[(j, i)];
                        if w != 0.0 {
                            g.iter_mut().zip(drj).for_each(|(gi, v)| *gi += w * v);
                        }
                    }
                    let w = d * tableau.c[i];
                    g.iter_mut().zip(&dr[nu]).for_each(|(gi, v)| *gi += w * v);
                    let gx = dnn.vjp(&st.alpha[i], &g, &mut p.dnn);
                    for c in 0..n_d {
                        gs[i * n_d + c] += gx[c];
                    }
                }
                p.stages_d.push(gs);

                let mut ga = vec![0.0; flat];
                let points = st
                    .alpha
                    .iter()
                    .zip(&st.beta)
                    .enumerate()
                    .map(|(j, (a, b))| (a, b, j * n_d, off_beta + j * n_a))
                    .chain(std::iter::once((
                        &st.xd_next,
                        &st.xa_next,
                        off_end,
                        off_end + n_d,
                    )));
                for (xd, xa, od, oa) in points {
                    let q = residual.residual(xd, xa);
                    let qn = norm(&q);
                    p.l_a += qn;
                    if qn == 0.0 {
                        continue;
                    }
                    let seed: Vec<f64> = q.iter().map(|v| scale * v / qn).collect();
                    let (gxd, gxa) = residual.vjp(xd, xa, &seed, &mut p.manifold);
                    for c in 0..n_d {
                        ga[od + c] += gxd[c];
                    }
                    for c in 0..n_a {
                        ga[oa + c] += gxa[c];
                    }
                }
                p.stages_a.push(ga);
            }
            p
        })
        .collect();

    let mut out = LossGradients {
        l_d: 0.0,
        l_a: 0.0,
        dnn: vec![0.0; n_theta],
        manifold: vec![0.0; n_phi],
        stages_d: Vec::with_capacity(samples.eta()),
        stages_a: Vec::with_capacity(samples.eta()),
    };
    for p in parts {
        out.l_d += p.l_d;
        out.l_a += p.l_a;
        out.dnn.iter_mut().zip(&p.dnn).for_each(|(a, b)| *a += b);
        out.manifold.iter_mut().zip(&p.manifold).for_each(|(a, b)| *a += b);
        out.stages_d.extend(p.stages_d);
        out.stages_a.extend(p.stages_a);
    }
    out.l_d *= scale;
    out.l_a *= scale;
    Ok(out)
}
