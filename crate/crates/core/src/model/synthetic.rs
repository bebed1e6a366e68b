//! Seeded multi-machine model generator.
//!
//! Each generator `i` owns four dynamic states at `4i..4i+4` (angle-like,
//! speed-like and two field-like states), eight algebraic variables at
//! `8i..8i+8` and two inputs at `2i..2i+2`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NdaeModel, Term, TermList};
use crate::error::{Error, Result};
use crate::numerics::{is_hurwitz, Matrix};

pub const DYN_PER_GEN: usize = 4;
pub const ALG_PER_GEN: usize = 8;
pub const INPUT_PER_GEN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticOptions {
    /// Scale of the nonlinear couplings; `0` yields `f ≡ 0` and a linear `g`.
    pub coupling: f64,
    pub w0: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            coupling: 1.0,
            w0: 1.0,
        }
    }
}

pub fn build_synthetic_model(n_gen: usize, seed: u64) -> Result<NdaeModel> {
    build_synthetic_model_with(n_gen, seed, &SyntheticOptions::default())
}

pub fn build_synthetic_model_with(
    n_gen: usize,
    seed: u64,
    opts: &SyntheticOptions,
) -> Result<NdaeModel> {
    if n_gen == 0 {
        return Err(Error::InvalidArgument("n_gen must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_d = DYN_PER_GEN * n_gen;
    let n_a = ALG_PER_GEN * n_gen;
    let m = INPUT_PER_GEN * n_gen;
    let coupling = opts.coupling;
    let angle = |i: usize| DYN_PER_GEN * i;

    // A_d: stable diagonal, skew rotation inside each generator block and a
    // weak symmetric-part perturbation elsewhere.
    let mut a_d = Matrix::zeros(n_d, n_d);
    for r in 0..n_d {
        a_d[(r, r)] = -rng.gen_range(0.5..3.0);
    }
    for i in 0..n_gen {
        let s = rng.gen_range(0.5..1.5);
        a_d[(angle(i), angle(i) + 1)] += s;
        a_d[(angle(i) + 1, angle(i))] -= s;
    }
    let weak = 0.3 / n_d as f64;
    let mut perturb = Matrix::zeros(n_d, n_d);
    for r in 0..n_d {
        for c in 0..n_d {
            if r != c {
                perturb[(r, c)] = rng.gen_range(-weak..weak);
            }
        }
    }
    let mut a_d_candidate = a_d.add(&perturb)?;
    while !is_hurwitz(&a_d_candidate) {
        perturb = perturb.scale(0.5);
        a_d_candidate = a_d.add(&perturb)?;
    }
    let a_d = a_d_candidate;

    // f: angle differences and cosine-weighted algebraic couplings.
    let n_f = 3 * n_gen;
    let mut f_terms = Vec::new();
    if coupling != 0.0 {
        for i in 0..n_gen {
            if n_gen == 1 {
                f_terms.push(Term::sin_diff(0, angle(0), angle(0) + 2, coupling * rng.gen_range(0.2..0.6)));
            }
            for j in 0..n_gen {
                if j != i {
                    let c = coupling * rng.gen_range(0.2..0.6);
                    f_terms.push(Term::sin_diff(3 * i, angle(i), angle(j), c));
                }
            }
            let c1 = coupling * rng.gen_range(0.3..0.8);
            let c2 = coupling * rng.gen_range(0.3..0.8);
            f_terms.push(Term::cos_times(3 * i + 1, angle(i), ALG_PER_GEN * i, c1));
            f_terms.push(Term::cos_times(3 * i + 2, angle(i) + 2, ALG_PER_GEN * i + 1, c2));
        }
    }
    let f = TermList::new(n_f, f_terms);
    let c_d = Matrix::from_fn(n_d, n_f, |r, c| {
        let spread = if r / DYN_PER_GEN == c / 3 { 0.4 } else { 0.1 };
        coupling * rng.gen_range(-spread..spread)
    });

    // g: one output per algebraic variable.
    let n_g = n_a;
    let mut g_terms = Vec::new();
    for i in 0..n_gen {
        for r in 0..ALG_PER_GEN {
            let out = ALG_PER_GEN * i + r;
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lin = sign * rng.gen_range(0.5..1.5);
            g_terms.push(Term::linear(out, angle(i) + r % DYN_PER_GEN, lin));
            if coupling != 0.0 {
                let partner = if n_gen == 1 { angle(0) + 3 } else { angle((i + 1) % n_gen) };
                g_terms.push(Term::sin_diff(out, angle(i), partner, coupling * rng.gen_range(-0.5..0.5)));
                let state = angle(i) + (r + 1) % DYN_PER_GEN;
                let alg = ALG_PER_GEN * i + (r + 1) % ALG_PER_GEN;
                g_terms.push(Term::cos_times(out, state, alg, coupling * rng.gen_range(-0.5..0.5)));
            }
        }
    }
    let g = TermList::new(n_g, g_terms);
    let c_a = Matrix::from_fn(n_a, n_g, |r, c| {
        if r == c {
            rng.gen_range(0.8..1.2)
        } else if r / ALG_PER_GEN == c / ALG_PER_GEN {
            rng.gen_range(-0.2..0.2)
        } else {
            0.0
        }
    });

    // A_a: block couplings plus a diagonal that dominates both the
    // off-diagonal entries and the x_a-Lipschitz bound of C_a·g, row- and
    // column-wise, so the symmetric part of ∂g̃/∂x_a is ⪰ I everywhere.
    let mut a_a = Matrix::from_fn(n_a, n_a, |r, c| {
        if r != c && r / ALG_PER_GEN == c / ALG_PER_GEN {
            rng.gen_range(-0.3..0.3)
        } else {
            0.0
        }
    });
    let g_bound = g.xa_lipschitz_bounds(n_d, n_a);
    let abs_c_a = Matrix::from_fn(n_a, n_g, |r, c| c_a[(r, c)].abs());
    let lip = abs_c_a.matmul(&g_bound)?;
    for r in 0..n_a {
        let mut d = 1.0;
        for c in 0..n_a {
            if c != r {
                d += a_a[(r, c)].abs() + a_a[(c, r)].abs();
            }
            d += lip[(r, c)] + lip[(c, r)];
        }
        a_a[(r, r)] = d + rng.gen_range(0.0..1.0);
    }

    let mut b = Matrix::zeros(n_d, m);
    for i in 0..n_gen {
        b[(angle(i) + 1, INPUT_PER_GEN * i)] = rng.gen_range(0.5..1.0);
        b[(angle(i) + 2, INPUT_PER_GEN * i + 1)] = rng.gen_range(0.5..1.0);
    }
    let h: Vec<f64> = (0..n_d)
        .map(|r| {
            if r % DYN_PER_GEN < 2 {
                rng.gen_range(0.5..1.5)
            } else {
                rng.gen_range(-0.5..0.5)
            }
        })
        .collect();

    NdaeModel::new(a_d, c_d, b, a_a, c_a, h, opts.w0, Arc::new(f), Arc::new(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::DaeSystem;
    use crate::model::ModelDocument;
    use crate::numerics::{finite_diff_jacobian, norm};

    fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = radius * rng.gen_range(0.0..1.0f64) / norm(&v).max(1e-12);
        v.iter().map(|x| x * scale).collect()
    }

    #[test]
    fn dimensions_follow_generator_count() {
        let m = build_synthetic_model(3, 0).unwrap();
        assert_eq!((m.n_d, m.n_a, m.m), (12, 24, 6));
        let m = build_synthetic_model(1, 0).unwrap();
        assert_eq!((m.n_d, m.n_a, m.m), (4, 8, 2));
        assert!(build_synthetic_model(0, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let a = ModelDocument::from_model(&build_synthetic_model(3, 42).unwrap()).unwrap();
        let b = ModelDocument::from_model(&build_synthetic_model(3, 42).unwrap()).unwrap();
        let c = ModelDocument::from_model(&build_synthetic_model(3, 43).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn nonlinearities_vanish_at_origin() {
        for seed in 0..5 {
            let m = build_synthetic_model(2, seed).unwrap();
            assert!(m.f.eval(&[0.0; 8], &[0.0; 16]).iter().all(|&v| v == 0.0));
            assert!(m.g.eval(&[0.0; 8], &[0.0; 16]).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn index1_margin_on_random_points() {
        for (n_gen, seed) in [(1, 3), (3, 7)] {
            let m = build_synthetic_model(n_gen, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let pts: Vec<_> = (0..100)
                .map(|_| (random_point(&mut rng, m.n_d, 5.0), random_point(&mut rng, m.n_a, 5.0)))
                .collect();
            assert!(m.index1_margin(&pts).unwrap() > 0.5);
        }
    }

    #[test]
    fn analytic_jacobians_match_fd() {
        let m = build_synthetic_model(3, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xd = random_point(&mut rng, m.n_d, 5.0);
            let xa = random_point(&mut rng, m.n_a, 5.0);
            let u = random_point(&mut rng, m.m, 1.0);
            let j = m.algebraic_jacobian(&xd, &xa).unwrap();
            let fd = finite_diff_jacobian(&|x: &[f64]| m.eval_algebraic_residual(&xd, x).unwrap(), &xa, 1e-6);
            assert!(j.sub(&fd).unwrap().max_abs() < 1e-5);

            let jac = DaeSystem::jacobians(&m, &xd, &xa, &u);
            let fd = finite_diff_jacobian(&|x: &[f64]| m.eval_dynamic_rhs(x, &xa, &u).unwrap(), &xd, 1e-6);
            assert!(jac.fd_xd.sub(&fd).unwrap().max_abs() < 1e-5);
            let fd = finite_diff_jacobian(&|x: &[f64]| m.eval_algebraic_residual(x, &xa).unwrap(), &xd, 1e-6);
            assert!(jac.ga_xd.sub(&fd).unwrap().max_abs() < 1e-5);
        }
    }

    #[test]
    fn consistent_init_residual() {
        let m = build_synthetic_model(3, 2).unwrap();
        let xd: Vec<f64> = (0..m.n_d).map(|i| 0.3 * i as f64 - 1.0).collect();
        let xa = m.consistent_init(&xd, &vec![0.0; m.n_a]).unwrap();
        assert!(norm(&m.eval_algebraic_residual(&xd, &xa).unwrap()) <= 1e-10);
    }

    #[test]
    fn a_d_is_hurwitz() {
        for seed in 0..10 {
            assert!(is_hurwitz(&build_synthetic_model(3, seed).unwrap().a_d));
        }
    }

    #[test]
    fn zero_coupling_is_linear() {
        let opts = SyntheticOptions {
            coupling: 0.0,
            ..Default::default()
        };
        let m = build_synthetic_model_with(2, 1, &opts).unwrap();
        assert!(m.f.as_terms().unwrap().terms.is_empty());
        assert!(m.c_d.max_abs() == 0.0);
    }
}
