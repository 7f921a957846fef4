//! Sign recovery for the Lasso under Gaussian random designs.
//!
//! The crate is organised around the life of a single experiment trial:
//!
//! * [`ensemble`] builds a population covariance, samples a design matrix,
//!   a sparse signal and noisy observations.
//! * [`solver`] solves the ℓ1-penalised least-squares program by cyclic
//!   coordinate descent and certifies the result through its KKT residual.
//! * [`conditions`] evaluates the exact (necessary and sufficient) sign
//!   recovery predicate and the incoherence quantities of a design.
//! * [`theory`] holds the closed-form threshold, schedule and moment
//!   formulas.
//! * [`experiment`] runs seeded, parallel sweeps over the sample-size
//!   control parameter and the Monte Carlo checks of the moment formulas.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod ensemble;
mod error;
pub mod experiment;
pub mod linalg;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};

/// Dense column-major matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense vector used throughout.
pub type Vector = nalgebra::DVector<f64>;
