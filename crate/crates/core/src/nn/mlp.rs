use serde::{Deserialize, Serialize};

use super::params::{init_params, mlp_layout, ParamShape, ParamVector};
use crate::error::{check_len, Error, Result};
use crate::numerics::Matrix;

/// Feedforward network: tanh on hidden layers, identity on the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamVector", into = "ParamVector")]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument("an MLP needs at least two layer sizes".into()));
        }
        let weights = layer_sizes.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Glorot-uniform initialization with zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let p = init_params(
            &ParamShape::Mlp {
                layer_sizes: layer_sizes.to_vec(),
            },
            seed,
        );
        net.set_params(&p.values)?;
        Ok(net)
    }

    /// Builds a network from explicit `(W, b)` layers.
    pub fn from_layers(layers: Vec<(Matrix, Vec<f64>)>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidArgument("an MLP needs at least one layer".into()));
        };
        let mut sizes = vec![first.0.cols()];
        for (w, b) in &layers {
            if w.cols() != *sizes.last().unwrap() || b.len() != w.rows() {
                return Err(Error::dims("layer shapes do not chain"));
            }
            sizes.push(w.rows());
        }
        let (weights, biases) = layers.into_iter().unzip();
        Ok(Self {
            layer_sizes: sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn layers(&self) -> impl Iterator<Item = (&Matrix, &[f64])> {
        self.weights.iter().zip(self.biases.iter().map(Vec::as_slice))
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameters: per layer `W` row-major then `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.layers() {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        check_len("MLP parameters", theta.len(), self.n_params())?;
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&theta[k..k + n]);
            k += n;
            let nb = b.len();
            b.copy_from_slice(&theta[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    pub fn param_vector(&self) -> ParamVector {
        ParamVector {
            layout: mlp_layout("", &self.layer_sizes),
            values: self.params(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("MLP input", x.len(), self.input_dim())?;
        Ok(self.eval(x))
    }

    pub(crate) fn eval(&self, x: &[f64]) -> Vec<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.to_vec();
        for (k, (w, b)) in self.layers().enumerate() {
            let mut z = b.to_vec();
            w.matvec_add(&a, &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        a
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_vec());
        for (k, (w, b)) in self.layers().enumerate() {
            let mut z = b.to_vec();
            w.matvec_add(acts.last().unwrap(), &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Reverse-mode gradients of `seedᵀ·net(x)` w.r.t. the flat parameters
    /// and the input.
    pub fn gradient(&self, seed: &[f64], x: &[f64]) -> Result<(ParamVector, Vec<f64>)> {
        check_len("MLP input", x.len(), self.input_dim())?;
        check_len("loss seed", seed.len(), self.output_dim())?;
        let mut grad = self.param_vector();
        grad.values.iter_mut().for_each(|v| *v = 0.0);
        let gx = self.backprop(seed, x, &mut grad.values);
        Ok((grad, gx))
    }

    /// Adds the parameter gradient of `seedᵀ·net(x)` into `grad` and returns
    /// the input gradient. Unchecked sizes.
    pub(crate) fn backprop(&self, seed: &[f64], x: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let acts = self.activations(x);
        let n_layers = self.weights.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut k = 0;
        for (w, b) in self.layers() {
            offsets.push(k);
            k += w.rows() * w.cols() + b.len();
        }
        let mut delta = seed.to_vec();
        for l in (0..n_layers).rev() {
            let w = &self.weights[l];
            let a_in = &acts[l];
            let (rows, cols) = w.shape();
            let off = offsets[l];
            for r in 0..rows {
                let d = delta[r];
                if d != 0.0 {
                    let gw = &mut grad[off + r * cols..off + (r + 1) * cols];
                    for (g, a) in gw.iter_mut().zip(a_in) {
                        *g += d * a;
                    }
                }
                grad[off + rows * cols + r] += d;
            }
            let mut back = vec![0.0; cols];
            w.matvec_t_add(&delta, &mut back);
            if l > 0 {
                for (bk, a) in back.iter_mut().zip(a_in) {
                    *bk *= 1.0 - a * a;
                }
            }
            delta = back;
        }
        delta
    }

    /// `∂net/∂x` at `x`.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_len("MLP input", x.len(), self.input_dim())?;
        Ok(self.jacobian_unchecked(x))
    }

    pub(crate) fn jacobian_unchecked(&self, x: &[f64]) -> Matrix {
        let acts = self.activations(x);
        let mut j = self.weights[0].clone();
        for l in 1..self.weights.len() {
            let a = &acts[l];
            for r in 0..j.rows() {
                let s = 1.0 - a[r] * a[r];
                j.row_mut(r).iter_mut().for_each(|v| *v *= s);
            }
            j = self.weights[l].matmul(&j).expect("chained layers");
        }
        j
    }

    /// Product of layer spectral-norm bounds (Frobenius), a Lipschitz bound.
    pub fn lipschitz_bound(&self) -> f64 {
        self.weights.iter().map(Matrix::norm_fro).product()
    }
}

impl TryFrom<ParamVector> for Mlp {
    type Error = Error;

    fn try_from(p: ParamVector) -> Result<Self> {
        let mut sizes = Vec::new();
        for pair in p.layout.chunks(2) {
            let [w, b] = pair else {
                return Err(Error::InvalidArgument("MLP layout must alternate w/b blocks".into()));
            };
            if b.rows != w.rows || b.cols != 1 {
                return Err(Error::dims("bias block does not match weight rows"));
            }
            if sizes.is_empty() {
                sizes.push(w.cols);
            } else if *sizes.last().unwrap() != w.cols {
                return Err(Error::dims("layer shapes do not chain"));
            }
            sizes.push(w.rows);
        }
        let mut net = Mlp::zeros(&sizes)?;
        if p.layout != net.param_vector().layout {
            return Err(Error::InvalidArgument("unexpected MLP block names".into()));
        }
        net.set_params(&p.values)?;
        Ok(net)
    }
}

impl From<Mlp> for ParamVector {
    fn from(m: Mlp) -> Self {
        m.param_vector()
    }
}
