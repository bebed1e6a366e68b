use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::params::{init_params, rho_sizes, ParamShape, ParamVector};
use crate::dae::{simulate, ButcherTableau, DaeJacobians, DaeSystem, SolverConfig, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::model::NdaeModel;
use crate::numerics::Matrix;

/// Fixed input transform γ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    #[default]
    Identity,
}

impl InputTransform {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            InputTransform::Identity => u.to_vec(),
        }
    }
}

/// Differential network `ẋ = A_nn·x + B_nn·ρ̂(x) + C_nn·γ(u) + h·w0`.
///
/// Trainable: `A_nn`, `B_nn` and the weights of `ρ̂`. `C_nn`, `γ`, `h` and
/// `w0` are fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DnnDocument", into = "DnnDocument")]
pub struct DnnModel {
    pub a_nn: Matrix,
    pub b_nn: Matrix,
    pub c_nn: Matrix,
    pub rho: Mlp,
    pub gamma: InputTransform,
    pub h: Vec<f64>,
    pub w0: f64,
}

impl DnnModel {
    pub fn new(
        a_nn: Matrix,
        b_nn: Matrix,
        c_nn: Matrix,
        rho: Mlp,
        h: Vec<f64>,
        w0: f64,
    ) -> Result<Self> {
        let n = a_nn.rows();
        if a_nn.shape() != (n, n)
            || b_nn.rows() != n
            || c_nn.rows() != n
            || rho.input_dim() != n
            || rho.output_dim() != b_nn.cols()
        {
            return Err(Error::dims("DNN blocks do not chain"));
        }
        check_len("h", h.len(), n)?;
        Ok(Self {
            a_nn,
            b_nn,
            c_nn,
            rho,
            gamma: InputTransform::Identity,
            h,
            w0,
        })
    }

    /// Fresh DNN for `model`: `n_B = n_d`, `C_nn = B`, `h` and `w0` copied,
    /// trainable blocks from [`init_params`].
    pub fn for_model(model: &NdaeModel, rho_hidden: &[usize], seed: u64) -> Result<Self> {
        let n = model.n_d;
        let mut dnn = Self::new(
            Matrix::zeros(n, n),
            Matrix::zeros(n, n),
            model.b.clone(),
            Mlp::zeros(&rho_sizes(n, n, rho_hidden))?,
            model.h.clone(),
            model.w0,
        )?;
        let p = init_params(
            &ParamShape::Dnn {
                n,
                n_b: n,
                rho_hidden: rho_hidden.to_vec(),
            },
            seed,
        );
        dnn.set_params(&p.values)?;
        Ok(dnn)
    }

    pub fn n(&self) -> usize {
        self.a_nn.rows()
    }

    pub fn n_b(&self) -> usize {
        self.b_nn.cols()
    }

    pub fn n_input(&self) -> usize {
        self.c_nn.cols()
    }

    pub fn shape(&self) -> ParamShape {
        let sizes = self.rho.layer_sizes();
        ParamShape::Dnn {
            n: self.n(),
            n_b: self.n_b(),
            rho_hidden: sizes[1..sizes.len() - 1].to_vec(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.n() * self.n() + self.n() * self.n_b() + self.rho.n_params()
    }

    /// `[A_nn, B_nn, ρ̂]` flattened row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(self.a_nn.as_slice());
        p.extend_from_slice(self.b_nn.as_slice());
        p.extend(self.rho.params());
        p
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        check_len("DNN parameters", theta.len(), self.n_params())?;
        let na = self.n() * self.n();
        let nb = self.n() * self.n_b();
        self.a_nn.as_mut_slice().copy_from_slice(&theta[..na]);
        self.b_nn.as_mut_slice().copy_from_slice(&theta[na..na + nb]);
        self.rho.set_params(&theta[na + nb..])
    }

    pub fn param_vector(&self) -> ParamVector {
        ParamVector {
            layout: self.shape().layout(),
            values: self.params(),
        }
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_len("x_nn", x.len(), self.n())?;
        check_len("u", u.len(), self.n_input())?;
        Ok(self.rhs_unchecked(x, u))
    }

    pub(crate) fn rhs_unchecked(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.a_nn.matvec_unchecked(x);
        self.b_nn.matvec_add(&self.rho.eval(x), &mut out);
        self.c_nn.matvec_add(&self.gamma.apply(u), &mut out);
        for (o, hi) in out.iter_mut().zip(&self.h) {
            *o += hi * self.w0;
        }
        out
    }

    /// `∂rhs/∂x = A_nn + B_nn·∂ρ̂/∂x`.
    pub fn state_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_len("x_nn", x.len(), self.n())?;
        Ok(self.jacobian_unchecked(x))
    }

    pub(crate) fn jacobian_unchecked(&self, x: &[f64]) -> Matrix {
        let jr = self.rho.jacobian_unchecked(x);
        self.a_nn
            .add(&self.b_nn.matmul(&jr).expect("chained"))
            .expect("square")
    }

    /// Vector-Jacobian product of `gᵀ·rhs(x, u)`: adds the parameter
    /// gradient into `grad` (layout of [`DnnModel::params`]) and returns
    /// the gradient w.r.t. `x`.
    pub fn vjp(&self, x: &[f64], g: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let n = self.n();
        let nb = self.n_b();
        let rho_x = self.rho.eval(x);
        for r in 0..n {
            let gr = g[r];
            if gr == 0.0 {
                continue;
            }
            for c in 0..n {
                grad[r * n + c] += gr * x[c];
            }
            for c in 0..nb {
                grad[n * n + r * nb + c] += gr * rho_x[c];
            }
        }
        let seed = self.b_nn.matvec_t(g).expect("sized");
        let mut gx = self.rho.backprop(&seed, x, &mut grad[n * n + n * nb..]);
        self.a_nn.matvec_t_add(g, &mut gx);
        gx
    }
}

/// Checkpoint form: layout descriptor + flat trainable array + fixed parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnDocument {
    #[serde(flatten)]
    pub params: ParamVector,
    pub c_nn: Matrix,
    pub gamma: InputTransform,
    pub h: Vec<f64>,
    pub w0: f64,
}

impl From<DnnModel> for DnnDocument {
    fn from(d: DnnModel) -> Self {
        Self {
            params: d.param_vector(),
            c_nn: d.c_nn,
            gamma: d.gamma,
            h: d.h,
            w0: d.w0,
        }
    }
}

impl TryFrom<DnnDocument> for DnnModel {
    type Error = Error;

    fn try_from(doc: DnnDocument) -> Result<Self> {
        let blocks = &doc.params.layout;
        let (Some(a), Some(b)) = (blocks.first(), blocks.get(1)) else {
            return Err(Error::InvalidArgument("DNN layout needs a_nn and b_nn".into()));
        };
        let n = a.rows;
        let n_layers = blocks[2..].len() / 2;
        if n_layers == 0 {
            return Err(Error::InvalidArgument("DNN layout has no rho layers".into()));
        }
        let hidden: Vec<usize> = blocks[2..]
            .chunks(2)
            .map(|w| w[0].rows)
            .take(n_layers - 1)
            .collect();
        let mut dnn = DnnModel::new(
            Matrix::zeros(n, n),
            Matrix::zeros(n, b.cols),
            doc.c_nn,
            Mlp::zeros(&rho_sizes(n, b.cols, &hidden))?,
            doc.h,
            doc.w0,
        )?;
        if dnn.shape().layout() != doc.params.layout {
            return Err(Error::InvalidArgument("DNN layout does not match its blocks".into()));
        }
        dnn.gamma = doc.gamma;
        dnn.set_params(&doc.params.values)?;
        Ok(dnn)
    }
}

struct DnnSystem<'a>(&'a DnnModel);

impl DaeSystem for DnnSystem<'_> {
    fn n_dyn(&self) -> usize {
        self.0.n()
    }

    fn n_alg(&self) -> usize {
        0
    }

    fn n_input(&self) -> usize {
        self.0.n_input()
    }

    fn dynamic_rhs(&self, xd: &[f64], _xa: &[f64], u: &[f64]) -> Vec<f64> {
        self.0.rhs_unchecked(xd, u)
    }

    fn algebraic_residual(&self, _xd: &[f64], _xa: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn jacobians(&self, xd: &[f64], _xa: &[f64], _u: &[f64]) -> DaeJacobians {
        let n = self.0.n();
        DaeJacobians {
            fd_xd: self.0.jacobian_unchecked(xd),
            fd_xa: Matrix::zeros(n, 0),
            ga_xd: Matrix::zeros(0, n),
            ga_xa: Matrix::zeros(0, 0),
        }
    }
}

/// Integrates the identified system `ẋ = dnn(x, u)` with the IRK machinery
/// and reports `x_a = ℓ̂(x)` at every output time.
pub fn dnn_simulate(
    dnn: &DnnModel,
    algebraic_map: &Mlp,
    x0: &[f64],
    input: &dyn Fn(f64) -> Vec<f64>,
    t_end: f64,
    tableau: &ButcherTableau,
    config: &SolverConfig,
) -> Result<Trajectory> {
    check_len("algebraic map input", algebraic_map.input_dim(), dnn.n())?;
    let mut traj = simulate(&DnnSystem(dnn), x0, input, t_end, tableau, config)?;
    traj.states_a = traj.states_d.iter().map(|x| algebraic_map.eval(x)).collect();
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_synthetic_model;
    use crate::numerics::{dot, finite_diff_jacobian, norm};

    fn linear(a: f64, n: usize) -> DnnModel {
        DnnModel::new(
            Matrix::identity(n).scale(a),
            Matrix::zeros(n, n),
            Matrix::zeros(n, 1),
            Mlp::zeros(&[n, 3, n]).unwrap(),
            vec![0.0; n],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn rhs_examples() {
        let mut d = linear(0.0, 2);
        assert_eq!(d.rhs(&[1.0, 2.0], &[1.0]).unwrap(), vec![0.0, 0.0]);
        d.a_nn = Matrix::identity(2).scale(-1.0);
        assert_eq!(d.rhs(&[2.0, -1.0], &[0.0]).unwrap(), vec![-2.0, 1.0]);
        d.b_nn = Matrix::identity(2);
        assert_eq!(d.rhs(&[2.0, -1.0], &[0.0]).unwrap(), vec![-2.0, 1.0]);
        assert!(d.rhs(&[2.0], &[0.0]).is_err());
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let model = build_synthetic_model(1, 3).unwrap();
        let dnn = DnnModel::for_model(&model, &[6], 2).unwrap();
        let x = [0.2, -0.5, 0.3, 0.1];
        let u = [0.4, -0.2];
        let g = [0.7, -0.3, 0.2, 1.1];
        let mut grad = vec![0.0; dnn.n_params()];
        let gx = dnn.vjp(&x, &g, &mut grad);
        let theta = dnn.params();
        let f = |th: &[f64]| {
            let mut d = dnn.clone();
            d.set_params(th).unwrap();
            vec![dot(&g, &d.rhs_unchecked(&x, &u))]
        };
        let fd = finite_diff_jacobian(&f, &theta, 1e-6);
        for i in 0..theta.len() {
            assert!((grad[i] - fd[(0, i)]).abs() < 1e-8, "param {i}");
        }
        let fdx = finite_diff_jacobian(&|v: &[f64]| vec![dot(&g, &dnn.rhs_unchecked(v, &u))], &x, 1e-6);
        for i in 0..4 {
            assert!((gx[i] - fdx[(0, i)]).abs() < 1e-8);
        }
        let j = dnn.state_jacobian(&x).unwrap();
        let fdj = finite_diff_jacobian(&|v: &[f64]| dnn.rhs_unchecked(v, &u), &x, 1e-6);
        assert!(j.sub(&fdj).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn init_from_model() {
        let model = build_synthetic_model(1, 0).unwrap();
        let d = DnnModel::for_model(&model, &[32], 1).unwrap();
        assert_eq!(d.c_nn, model.b);
        assert_eq!(d.h, model.h);
        assert_eq!(d.a_nn, Matrix::identity(4).scale(-0.1));
        assert_eq!(d.rho.layer_sizes(), &[4, 32, 4]);
    }

    #[test]
    fn simulate_linear_decay() {
        let d = linear(-1.0, 2);
        let ell = Mlp::zeros(&[2, 3, 5]).unwrap();
        let cfg = SolverConfig {
            newton_tol: 1e-12,
            ..SolverConfig::with_delta(0.01)
        };
        let tr = dnn_simulate(&d, &ell, &[1.0, -2.0], &|_| vec![0.0], 1.0, &ButcherTableau::radau2(), &cfg)
            .unwrap();
        let e = (-1f64).exp();
        let last = tr.states_d.last().unwrap();
        assert!((last[0] - e).abs() < 1e-6 && (last[1] + 2.0 * e).abs() < 1e-6);
        assert!(tr.states_a.iter().all(|xa| xa.len() == 5 && norm(xa) == 0.0));
        let tr = dnn_simulate(&d, &ell, &[1.0, -2.0], &|_| vec![0.0], 0.0, &ButcherTableau::radau2(), &cfg)
            .unwrap();
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn lipschitz_bound_holds() {
        let model = build_synthetic_model(1, 8).unwrap();
        let d = DnnModel::for_model(&model, &[10], 3).unwrap();
        let bound = d.a_nn.norm_fro() + d.b_nn.norm_fro() * d.rho.lipschitz_bound();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        use rand::Rng;
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let u = [0.0, 0.0];
            let q = norm(&crate::numerics::sub(&d.rhs_unchecked(&x, &u), &d.rhs_unchecked(&y, &u)))
                / norm(&crate::numerics::sub(&x, &y));
            assert!(q <= bound);
        }
    }

    #[test]
    fn document_round_trip() {
        let model = build_synthetic_model(1, 2).unwrap();
        let d = DnnModel::for_model(&model, &[5, 4], 7).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: DnnModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
