use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DaeSystem;
use crate::error::{Error, Result};
use crate::numerics::norm;
use crate::table::{self, Columns};

/// Time-stamped samples of `(x_d, x_a, u)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states_d: Vec<Vec<f64>>,
    pub states_a: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states_d: Vec::with_capacity(n),
            states_a: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, xd: Vec<f64>, xa: Vec<f64>, u: Vec<f64>) {
        self.times.push(t);
        self.states_d.push(xd);
        self.states_a.push(xa);
        self.inputs.push(u);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(n_d, n_a, m)` from the first row, zeros when empty.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self.times.first() {
            Some(_) => (self.states_d[0].len(), self.states_a[0].len(), self.inputs[0].len()),
            None => (0, 0, 0),
        }
    }

    pub(crate) fn last_state(&self) -> (&[f64], &[f64]) {
        let i = self.len() - 1;
        (&self.states_d[i], &self.states_a[i])
    }

    /// Largest `‖g̃(x_d, x_a)‖` over stored points.
    pub fn max_manifold_residual<S: DaeSystem + ?Sized>(&self, system: &S) -> f64 {
        self.states_d
            .iter()
            .zip(&self.states_a)
            .map(|(xd, xa)| norm(&system.algebraic_residual(xd, xa)))
            .fold(0.0, f64::max)
    }

    pub fn header(n_d: usize, n_a: usize, m: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(table::indexed("xd", n_d));
        h.extend(table::indexed("xa", n_a));
        h.extend(table::indexed("u", m));
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let (n_d, n_a, m) = self.dims();
        let rows = (0..self.len()).map(|i| {
            let mut r = vec![self.times[i]];
            r.extend_from_slice(&self.states_d[i]);
            r.extend_from_slice(&self.states_a[i]);
            r.extend_from_slice(&self.inputs[i]);
            r
        });
        table::to_csv(&Self::header(n_d, n_a, m), rows)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (header, rows) = table::parse_csv(text)?;
        let cols = Columns::new(&header);
        let t = cols.single("t")?;
        let xd = cols.group("xd")?;
        let xa = cols.group("xa")?;
        let u = cols.group("u")?;
        let mut traj = Self::with_capacity(rows.len());
        for r in rows {
            traj.push(r[t], pick(&r, &xd), pick(&r, &xa), pick(&r, &u));
        }
        Ok(traj)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn pick(row: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| row[i]).collect()
}

/// One training pair `(x^n, x^{n+1})` with the input at `t` and the step.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub t: f64,
    pub xd: Vec<f64>,
    pub xa: Vec<f64>,
    pub xd_next: Vec<f64>,
    pub xa_next: Vec<f64>,
    pub u: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub pairs: Vec<SamplePair>,
}

impl SampleSet {
    pub fn new(pairs: Vec<SamplePair>) -> Self {
        Self { pairs }
    }

    /// η, the number of pairs.
    pub fn eta(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.pairs
            .first()
            .map_or((0, 0, 0), |p| (p.xd.len(), p.xa.len(), p.u.len()))
    }

    pub fn extend(&mut self, other: SampleSet) {
        self.pairs.extend(other.pairs);
    }

    pub fn header(n_d: usize, n_a: usize, m: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(table::indexed("xd", n_d));
        h.extend(table::indexed("xa", n_a));
        h.extend(table::indexed("xd_next", n_d));
        h.extend(table::indexed("xa_next", n_a));
        h.extend(table::indexed("u", m));
        h.push("delta".to_string());
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let (n_d, n_a, m) = self.dims();
        let rows = self.pairs.iter().map(|p| {
            let mut r = vec![p.t];
            for v in [&p.xd, &p.xa, &p.xd_next, &p.xa_next, &p.u] {
                r.extend_from_slice(v);
            }
            r.push(p.delta);
            r
        });
        table::to_csv(&Self::header(n_d, n_a, m), rows)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (header, rows) = table::parse_csv(text)?;
        let cols = Columns::new(&header);
        let t = cols.single("t")?;
        let delta = cols.single("delta")?;
        let groups = ["xd", "xa", "xd_next", "xa_next", "u"]
            .iter()
            .map(|g| cols.group(g))
            .collect::<Result<Vec<_>>>()?;
        let pairs = rows
            .iter()
            .map(|r| SamplePair {
                t: r[t],
                xd: pick(r, &groups[0]),
                xa: pick(r, &groups[1]),
                xd_next: pick(r, &groups[2]),
                xa_next: pick(r, &groups[3]),
                u: pick(r, &groups[4]),
                delta: r[delta],
            })
            .collect();
        Ok(Self { pairs })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Draws `eta` adjacent-point pairs uniformly without replacement. The
/// order is the sampler's (shuffled) order; fully determined by `seed`.
pub fn sample_dataset(traj: &Trajectory, eta: usize, seed: u64) -> Result<SampleSet> {
    let available = traj.len().saturating_sub(1);
    if eta > available {
        return Err(Error::TooFewPoints {
            requested: eta,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = index::sample(&mut rng, available, eta)
        .into_iter()
        .map(|n| SamplePair {
            t: traj.times[n],
            xd: traj.states_d[n].clone(),
            xa: traj.states_a[n].clone(),
            xd_next: traj.states_d[n + 1].clone(),
            xa_next: traj.states_a[n + 1].clone(),
            u: traj.inputs[n].clone(),
            delta: traj.times[n + 1] - traj.times[n],
        })
        .collect();
    Ok(SampleSet { pairs })
}
