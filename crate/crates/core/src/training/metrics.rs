use serde::{Deserialize, Serialize};

use crate::dae::Trajectory;
use crate::error::{Error, Result};
use crate::numerics::norm;

/// Marks time points where the true state norm is below [`TINY_NORM`].
pub const UNDEFINED_RELATIVE_ERROR: f64 = -1.0;
const TINY_NORM: f64 = 1e-12;
const GRID_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateGroup {
    Dynamic,
    Algebraic,
}

fn states(traj: &Trajectory, group: StateGroup) -> &[Vec<f64>] {
    match group {
        StateGroup::Dynamic => &traj.states_d,
        StateGroup::Algebraic => &traj.states_a,
    }
}

fn check_grids(truth: &Trajectory, pred: &Trajectory, group: StateGroup) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::GridMismatch);
    }
    let same = truth
        .times
        .iter()
        .zip(&pred.times)
        .all(|(a, b)| (a - b).abs() <= GRID_TOL * a.abs().max(1.0));
    if !same {
        return Err(Error::GridMismatch);
    }
    let width = |t: &Trajectory| states(t, group).first().map_or(0, Vec::len);
    if width(truth) != width(pred) {
        return Err(Error::dims("state widths differ between trajectories"));
    }
    Ok(())
}

/// `100·‖x(t) − x̂(t)‖ / ‖x(t)‖` per time point, or
/// [`UNDEFINED_RELATIVE_ERROR`] where `‖x(t)‖ < 1e-12`.
pub fn relative_error_series(
    truth: &Trajectory,
    pred: &Trajectory,
    group: StateGroup,
) -> Result<Vec<f64>> {
    check_grids(truth, pred, group)?;
    Ok(states(truth, group)
        .iter()
        .zip(states(pred, group))
        .map(|(x, y)| {
            let nx = norm(x);
            if nx < TINY_NORM {
                UNDEFINED_RELATIVE_ERROR
            } else {
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                100.0 * norm(&diff) / nx
            }
        })
        .collect())
}

/// Mean over the defined entries; `None` when every entry is undefined.
pub fn mean_relative_error(series: &[f64]) -> Option<f64> {
    let defined: Vec<f64> = series.iter().copied().filter(|v| *v >= 0.0).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub index: usize,
    pub rmse: f64,
    pub max_abs: f64,
}

/// Per-component RMSE and max absolute error over the whole trajectory.
pub fn component_errors(
    truth: &Trajectory,
    pred: &Trajectory,
    group: StateGroup,
) -> Result<Vec<ComponentError>> {
    check_grids(truth, pred, group)?;
    let xs = states(truth, group);
    let ys = states(pred, group);
    let width = xs.first().map_or(0, Vec::len);
    let n = xs.len().max(1) as f64;
    Ok((0..width)
        .map(|i| {
            let (mut sq, mut mx) = (0.0f64, 0.0f64);
            for (x, y) in xs.iter().zip(ys) {
                let d = (x[i] - y[i]).abs();
                sq += d * d;
                mx = mx.max(d);
            }
            ComponentError {
                index: i,
                rmse: (sq / n).sqrt(),
                max_abs: mx,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, Vec<f64>)]) -> Trajectory {
        let mut t = Trajectory::with_capacity(points.len());
        for (time, x) in points {
            t.push(*time, x.clone(), vec![], vec![]);
        }
        t
    }

    #[test]
    fn examples() {
        let a = traj(&[(0.0, vec![3.0, 4.0]), (0.1, vec![0.0, 0.0])]);
        let b = traj(&[(0.0, vec![3.0, 4.5]), (0.1, vec![1.0, 0.0])]);
        let e = relative_error_series(&a, &b, StateGroup::Dynamic).unwrap();
        assert!((e[0] - 10.0).abs() < 1e-12);
        assert_eq!(e[1], UNDEFINED_RELATIVE_ERROR);
        assert_eq!(mean_relative_error(&e), Some(e[0]));
        assert_eq!(mean_relative_error(&[UNDEFINED_RELATIVE_ERROR]), None);

        let same = relative_error_series(&a, &a, StateGroup::Dynamic).unwrap();
        assert_eq!(same[0], 0.0);

        let c = component_errors(&a, &b, StateGroup::Dynamic).unwrap();
        assert_eq!(c[0].max_abs, 1.0);
        assert!((c[1].rmse - (0.125f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch() {
        let a = traj(&[(0.0, vec![1.0]), (0.1, vec![1.0])]);
        let b = traj(&[(0.0, vec![1.0]), (0.2, vec![1.0])]);
        assert!(matches!(
            relative_error_series(&a, &b, StateGroup::Dynamic),
            Err(Error::GridMismatch)
        ));
        let c = traj(&[(0.0, vec![1.0])]);
        assert!(matches!(
            component_errors(&a, &c, StateGroup::Dynamic),
            Err(Error::GridMismatch)
        ));
    }
}
