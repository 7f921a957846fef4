use thiserror::Error;

use crate::solver::LassoSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("correlation parameter {0} must satisfy |rho| < 1")]
    InvalidRho(f64),
    #[error("column {0} of the design matrix is identically zero")]
    ZeroColumn(usize),
    #[error("sparsity s = {s} is invalid for dimension p = {p} (need 1 <= s < p)")]
    InvalidSparsity { s: usize, p: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sparsity regime yields s = {s} for p = {p}, outside [1, p)")]
    DegenerateRegime { s: i64, p: usize },
    #[error("coordinate descent stopped after {} sweeps with KKT residual {:.3e}", .0.iterations, .0.kkt_residual)]
    NotConverged(Box<LassoSolution>),
    #[error("unpenalised problem is underdetermined (n = {n}, p = {p} or rank deficient)")]
    Underdetermined { n: usize, p: usize },
    #[error("support Gram matrix is numerically singular (condition number {0:.3e})")]
    SingularGram(f64),
    #[error("population covariance restricted to the support is singular")]
    SingularSubmatrix,
    #[error("invalid threshold constants: {0}")]
    InvalidConstants(String),
    #[error("need p - s >= 2, got p = {p}, s = {s}")]
    DegenerateGeometry { p: usize, s: usize },
    #[error("lambda schedule needs s >= 2 (log s > 0), got s = {0}")]
    DegenerateSparsity(usize),
    #[error("moment formula needs n > {needed}, got n = {n}")]
    InsufficientDof { n: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
