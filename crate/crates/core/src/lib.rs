//! Simulation and neural identification of semi-explicit index-1
//! differential-algebraic power-system models.
//!
//! The pipeline is: build or load an [`model::NdaeModel`], integrate it with
//! the fixed-step implicit Runge–Kutta solver in [`dae`], fit the algebraic
//! map and a differential network in [`training`], and bound the
//! asymptotic identification error in [`certificate`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificate;
pub mod cli;
pub mod dae;
pub mod error;
pub mod model;
pub mod nn;
pub mod numerics;
pub mod table;
pub mod training;

pub use error::{Error, Result};
