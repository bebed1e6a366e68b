use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Per-channel sinusoid `u_k(t) = offset_k + amplitude_k·sin(2π·f·t + phase_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    pub offset: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub frequency: f64,
    pub phase: Vec<f64>,
}

impl InputSignal {
    pub fn new(offset: Vec<f64>, amplitude: Vec<f64>, frequency: f64, phase: Vec<f64>) -> Result<Self> {
        check_len("amplitude", amplitude.len(), offset.len())?;
        check_len("phase", phase.len(), offset.len())?;
        Ok(Self {
            offset,
            amplitude,
            frequency,
            phase,
        })
    }

    pub fn constant(u: Vec<f64>) -> Self {
        let m = u.len();
        Self {
            offset: u,
            amplitude: vec![0.0; m],
            frequency: 0.0,
            phase: vec![0.0; m],
        }
    }

    pub fn zero(m: usize) -> Self {
        Self::constant(vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        self.offset
            .iter()
            .zip(&self.amplitude)
            .zip(&self.phase)
            .map(|((o, a), p)| o + a * (w * t + p).sin())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_sinusoid() {
        let s = InputSignal::new(vec![1.0, 0.0], vec![0.5, 2.0], 0.25, vec![0.0, 0.0]).unwrap();
        let u = s.eval(1.0);
        assert!((u[0] - 1.5).abs() < 1e-15 && (u[1] - 2.0).abs() < 1e-15);
        assert_eq!(InputSignal::zero(3).eval(7.0), vec![0.0; 3]);
        assert!(InputSignal::new(vec![0.0], vec![], 1.0, vec![0.0]).is_err());
    }
}
