//! Cyclic coordinate descent for
//!
//! ```text
//! minimize  (1/2n) ‖Y − Xβ‖² + λ ‖β‖₁
//! ```
//!
//! The stopping rule is the KKT residual: at an optimum there is a
//! subgradient `z ∈ ∂‖β‖₁` with `(1/n) Xᵀ(Xβ − Y) + λ z = 0`.

use crate::ensemble::SparseSignal;
use crate::linalg::{check_len, gram_cholesky};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Convergence tolerance on [`kkt_residual`].
    pub tol_kkt: f64,
    /// Maximum number of full sweeps over the coordinates.
    pub max_iters: usize,
    /// Entries with magnitude at or below this are read as zero when
    /// extracting sign patterns.
    pub zero_threshold: f64,
    /// Keep the objective value after every sweep in
    /// [`LassoSolution::objective_trace`].
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-8,
            max_iters: 100_000,
            zero_threshold: 0.0,
            record_objective: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoSolution {
    pub beta_hat: Vector,
    pub lambda: f64,
    pub kkt_residual: f64,
    /// Number of full sweeps performed.
    pub iterations: usize,
    pub objective: f64,
    /// Objective after each sweep (full or active-set), when requested.
    pub objective_trace: Vec<f64>,
}

/// `(1/2n)‖Y − Xβ‖² + λ‖β‖₁`, evaluated from scratch.
pub fn objective(x: &Matrix, y: &Vector, lambda: f64, beta: &Vector) -> f64 {
    let r = y - x * beta;
    r.norm_squared() / (2.0 * x.nrows() as f64) + lambda * beta.lp_norm(1)
}

fn check_dims(x: &Matrix, y: &Vector, beta: Option<&Vector>, lambda: f64) -> Result<()> {
    check_len("response", y.len(), x.nrows())?;
    if let Some(b) = beta {
        check_len("coefficient vector", b.len(), x.ncols())?;
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be a finite nonnegative number, got {lambda}"
        )));
    }
    Ok(())
}

/// Largest violation of the optimality conditions, with `g = (1/n)Xᵀ(Xβ − Y)`:
/// `|g_i + λ sgn(β_i)|` on nonzero coordinates and `max(0, |g_i| − λ)` on
/// zero coordinates.
pub fn kkt_residual(x: &Matrix, y: &Vector, lambda: f64, beta: &Vector) -> Result<f64> {
    check_dims(x, y, Some(beta), lambda)?;
    let r = y - x * beta;
    Ok(residual_from(x, &r, lambda, beta))
}

fn residual_from(x: &Matrix, r: &Vector, lambda: f64, beta: &Vector) -> f64 {
    let n = x.nrows() as f64;
    let g = -(x.tr_mul(r)) / n;
    g.iter()
        .zip(beta.iter())
        .map(|(&gi, &bi)| {
            if bi != 0.0 {
                (gi + lambda * bi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves the Lasso by cyclic coordinate descent.
///
/// Full sweeps alternate with sweeps restricted to the current nonzero set;
/// the KKT residual is checked after every full sweep on a freshly
/// recomputed residual vector. On `NotConverged` the error carries the last
/// iterate.
pub fn solve_lasso(
    x: &Matrix,
    y: &Vector,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<LassoSolution> {
    check_dims(x, y, None, lambda)?;
    if !(opts.tol_kkt > 0.0) || opts.max_iters == 0 {
        return Err(Error::InvalidConfig(
            "solver needs tol_kkt > 0 and max_iters >= 1".into(),
        ));
    }
    let (n, p) = x.shape();
    if lambda == 0.0 && (n < p || gram_cholesky(&x.tr_mul(x)).is_err()) {
        return Err(Error::Underdetermined { n, p });
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / nf).collect();

    let mut beta = Vector::zeros(p);
    let mut r = y.clone();
    let mut trace = Vec::new();
    let record = |beta: &Vector, r: &Vector, trace: &mut Vec<f64>| {
        if opts.record_objective {
            trace.push(r.norm_squared() / (2.0 * nf) + lambda * beta.lp_norm(1));
        }
    };

    // Zero is optimal iff ‖Xᵀ Y / n‖_∞ ≤ λ.
    let mut kkt = residual_from(x, &r, lambda, &beta);
    let mut sweeps = 0;
    while kkt > opts.tol_kkt && sweeps < opts.max_iters {
        sweep(x, &col_sq, lambda, &mut beta, &mut r, 0..p);
        sweeps += 1;
        record(&beta, &r, &mut trace);

        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        let mut inner = 0;
        while inner < 1000 && !active.is_empty() {
            let delta = sweep(
                x,
                &col_sq,
                lambda,
                &mut beta,
                &mut r,
                active.iter().copied(),
            );
            record(&beta, &r, &mut trace);
            inner += 1;
            if delta <= 0.1 * opts.tol_kkt {
                break;
            }
        }

        r = y - x * &beta;
        kkt = residual_from(x, &r, lambda, &beta);
    }

    let solution = LassoSolution {
        objective: objective(x, y, lambda, &beta),
        beta_hat: beta,
        lambda,
        kkt_residual: kkt,
        iterations: sweeps,
        objective_trace: trace,
    };
    if kkt > opts.tol_kkt {
        return Err(Error::NotConverged(Box::new(solution)));
    }
    Ok(solution)
}

/// One pass of exact coordinate minimisation over `coords`, keeping
/// `r = Y − Xβ` up to date. Returns the largest scaled coordinate move.
fn sweep(
    x: &Matrix,
    col_sq: &[f64],
    lambda: f64,
    beta: &mut Vector,
    r: &mut Vector,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let nf = x.nrows() as f64;
    let mut max_move: f64 = 0.0;
    for j in coords {
        let c = col_sq[j];
        if c == 0.0 {
            beta[j] = 0.0;
            continue;
        }
        let col = x.column(j);
        let old = beta[j];
        let rho = col.dot(r) / nf + c * old;
        let new = soft_threshold(rho, lambda) / c;
        if new != old {
            r.axpy(old - new, &col, 1.0);
            beta[j] = new;
            max_move = max_move.max((new - old).abs() * c);
        }
    }
    max_move
}

/// Entrywise sign with a dead zone: 0 where `|β_i| ≤ τ`.
pub fn sign_pattern(beta: &Vector, tau: f64) -> Vec<i8> {
    beta.iter()
        .map(|&b| {
            if b.abs() <= tau {
                0
            } else if b > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Whether `beta_hat` has exactly the signed support of the true signal.
pub fn recovery_success(beta_hat: &Vector, signal: &SparseSignal, tau: f64) -> Result<bool> {
    check_len("estimate", beta_hat.len(), signal.dim())?;
    Ok(sign_pattern(beta_hat, tau) == sign_pattern(signal.beta(), 0.0))
}
