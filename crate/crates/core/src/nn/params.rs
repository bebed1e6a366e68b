use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named block of a flat parameter vector, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat trainable parameters θ with their layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub layout: Vec<ParamBlock>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Vec<ParamBlock>) -> Self {
        let n = layout.iter().map(ParamBlock::len).sum();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(layout: Vec<ParamBlock>, values: Vec<f64>) -> Result<Self> {
        let n: usize = layout.iter().map(ParamBlock::len).sum();
        if n != values.len() {
            return Err(Error::dims(format!(
                "layout describes {n} parameters, got {}",
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for b in &self.layout {
            if b.name == name {
                return Some(start..start + b.len());
            }
            start += b.len();
        }
        None
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.range(name).map(|r| &self.values[r])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.range(name).map(move |r| &mut self.values[r])
    }

    /// Mean of absolute entries (0 for an empty vector).
    pub fn mean_abs(&self) -> f64 {
        mean_abs(&self.values)
    }
}

pub(crate) fn mean_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

/// Architecture description accepted by [`init_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamShape {
    /// Feedforward net with the given layer sizes (input first).
    Mlp { layer_sizes: Vec<usize> },
    /// DNN with state size `n`, `n_b` nonlinear features and the hidden
    /// sizes of ρ̂.
    Dnn {
        n: usize,
        n_b: usize,
        rho_hidden: Vec<usize>,
    },
}

impl ParamShape {
    pub fn layout(&self) -> Vec<ParamBlock> {
        match self {
            ParamShape::Mlp { layer_sizes } => mlp_layout("", layer_sizes),
            ParamShape::Dnn { n, n_b, rho_hidden } => {
                let mut l = vec![ParamBlock::new("a_nn", *n, *n), ParamBlock::new("b_nn", *n, *n_b)];
                l.extend(mlp_layout("rho.", &rho_sizes(*n, *n_b, rho_hidden)));
                l
            }
        }
    }
}

pub(crate) fn rho_sizes(n: usize, n_b: usize, hidden: &[usize]) -> Vec<usize> {
    let mut s = vec![n];
    s.extend_from_slice(hidden);
    s.push(n_b);
    s
}

pub(crate) fn mlp_layout(prefix: &str, sizes: &[usize]) -> Vec<ParamBlock> {
    sizes
        .windows(2)
        .enumerate()
        .flat_map(|(k, w)| {
            [
                ParamBlock::new(format!("{prefix}w{k}"), w[1], w[0]),
                ParamBlock::new(format!("{prefix}b{k}"), w[1], 1),
            ]
        })
        .collect()
}

/// Glorot-uniform weights `U(±sqrt(6/(fan_in+fan_out)))`, zero biases,
/// `A_nn = −0.1·I` and `B_nn ~ U(±0.1)`.
pub fn init_params(shape: &ParamShape, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamVector::zeros(shape.layout());
    let layout = p.layout.clone();
    let mut offset = 0;
    for b in &layout {
        let vals = &mut p.values[offset..offset + b.len()];
        let leaf = b.name.rsplit('.').next().unwrap_or(&b.name);
        match leaf {
            "a_nn" => {
                for i in 0..b.rows {
                    vals[i * b.cols + i] = -0.1;
                }
            }
            "b_nn" => vals.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1)),
            w if w.starts_with('w') => {
                let bound = (6.0 / (b.rows + b.cols) as f64).sqrt();
                vals.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
            }
            _ => {}
        }
        offset += b.len();
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dnn_shape() -> ParamShape {
        ParamShape::Dnn {
            n: 3,
            n_b: 3,
            rho_hidden: vec![5],
        }
    }

    #[test]
    fn deterministic_and_structured() {
        let a = init_params(&dnn_shape(), 9);
        assert_eq!(a, init_params(&dnn_shape(), 9));
        assert_ne!(a.values, init_params(&dnn_shape(), 10).values);
        assert_eq!(a.block("rho.b0").unwrap(), &[0.0; 5]);
        assert_eq!(a.block("rho.b1").unwrap(), &[0.0; 3]);
        let a_nn = a.block("a_nn").unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a_nn[i * 3 + j], if i == j { -0.1 } else { 0.0 });
            }
        }
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a.block("rho.w0").unwrap().iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn layout_sizes() {
        let p = init_params(&ParamShape::Mlp { layer_sizes: vec![2, 4, 1] }, 0);
        assert_eq!(p.len(), 2 * 4 + 4 + 4 + 1);
        assert!(ParamVector::from_values(p.layout.clone(), vec![0.0; 3]).is_err());
        assert_eq!(p.mean_abs(), mean_abs(&p.values));
    }
}
