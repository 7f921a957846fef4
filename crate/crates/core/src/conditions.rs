//! Exact sign-recovery conditions for a fixed design, noise vector and
//! regularisation level, plus sample and population incoherence constants.
//!
//! With `G = X_Sᵀ X_S` invertible and `b = sgn(β*_S)`, the Lasso has an
//! optimum with `sgn(β̂) = sgn(β*)` if and only if
//!
//! ```text
//! (a)  |X_{Sᶜ}ᵀ X_S G⁻¹ [X_Sᵀ W / n − λ b] − X_{Sᶜ}ᵀ W / n| ≤ λ
//! (b)  b ⊙ (β*_S + (G/n)⁻¹ [X_Sᵀ W / n − λ b]) > 0
//! ```
//!
//! elementwise. The vector inside (b) is `β*_S + U`, the support part of the
//! only candidate optimum with subgradient `b` on `S`; it must keep the signs
//! of `β*_S`, so being nonzero is not enough. The vector inside (a) is `−V`,
//! where `U`, `V` are the variables computed by [`compute_uv`].

use crate::ensemble::{Covariance, SparseSignal};
use crate::linalg::{
    check_len, complement, gram_cholesky, inf_norm, select_columns, select_entries, submatrix,
    sym_eigen_extremes,
};
use crate::{Error, Matrix, Result, Vector};

/// Margins closer to zero than this are treated as numerically undecided.
pub const AMBIGUITY_TOL: f64 = 1e-6;

/// `U_i` over the support and `V_j` over its complement.
#[derive(Clone, Debug)]
pub struct UvVariables {
    pub u: Vector,
    pub v: Vector,
    /// `sgn(β*_S)`.
    pub b: Vector,
    /// Indices of `Sᶜ`, aligned with `v`.
    pub complement: Vec<usize>,
}

impl UvVariables {
    /// `N = p − s`.
    pub fn n_complement(&self) -> usize {
        self.v.len()
    }

    /// `max_j |V_j| ≤ λ`, i.e. condition (a).
    pub fn event_mv(&self, lambda: f64) -> bool {
        self.v.amax() <= lambda
    }

    /// `max_i |U_i| ≤ ρ_min`, sufficient for condition (b).
    pub fn event_mu(&self, rho_min: f64) -> bool {
        self.u.amax() <= rho_min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryCertificate {
    pub cond_a: bool,
    pub cond_b: bool,
    /// `λ − max_j |V_j|`.
    pub margin_a: f64,
    /// `ρ_min − max_i |U_i|`.
    pub margin_b: f64,
    /// `min_i b_i (β*_i + U_i) − δ_b`, the slack of condition (b) itself.
    pub slack_b: f64,
    pub event_mv: bool,
    pub event_mu: bool,
}

impl RecoveryCertificate {
    /// Sign recovery holds.
    pub fn holds(&self) -> bool {
        self.cond_a && self.cond_b
    }

    /// Either condition is within `tol` of its boundary.
    pub fn is_ambiguous(&self, tol: f64) -> bool {
        self.margin_a.abs() <= tol || self.slack_b.abs() <= tol
    }
}

struct SupportSystem {
    xs: Matrix,
    chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    b: Vector,
    beta_s: Vector,
    complement: Vec<usize>,
}

fn support_system(x: &Matrix, signal: &SparseSignal, w: &Vector) -> Result<SupportSystem> {
    check_len("signal", signal.dim(), x.ncols())?;
    check_len("noise", w.len(), x.nrows())?;
    let support = signal.support();
    let xs = select_columns(x, support);
    let chol = gram_cholesky(&xs.tr_mul(&xs))?;
    Ok(SupportSystem {
        chol,
        b: signal.support_signs(),
        beta_s: select_entries(signal.beta(), support),
        complement: complement(support, x.ncols()),
        xs,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Evaluates both recovery conditions. `delta_b` is the strictness margin
/// for (b): the condition requires `b ⊙ (β*_S + U) > delta_b`.
pub fn lemma1_check(
    x: &Matrix,
    signal: &SparseSignal,
    w: &Vector,
    lambda: f64,
    delta_b: f64,
) -> Result<RecoveryCertificate> {
    check_lambda(lambda)?;
    let sys = support_system(x, signal, w)?;
    let n = x.nrows() as f64;

    // h = X_Sᵀ W / n − λ b,  t = G⁻¹ h
    let h = sys.xs.tr_mul(w) / n - &sys.b * lambda;
    let t = sys.chol.solve(&h);

    // (a): X_{Sᶜ}ᵀ (X_S t − W/n)
    let a = &sys.xs * &t - w / n;
    let lhs_a = select_entries(&x.tr_mul(&a), &sys.complement);
    let max_v = lhs_a.amax();

    // (b): β*_S + n t
    let u = t * n;
    let est = &sys.beta_s + &u;
    let min_est = est
        .iter()
        .zip(sys.b.iter())
        .fold(f64::INFINITY, |m, (v, b)| m.min(v * b));
    let max_u = u.amax();

    Ok(RecoveryCertificate {
        cond_a: max_v <= lambda,
        cond_b: min_est > delta_b,
        margin_a: lambda - max_v,
        margin_b: signal.rho_min() - max_u,
        slack_b: min_est - delta_b,
        event_mv: max_v <= lambda,
        event_mu: max_u <= signal.rho_min(),
    })
}

/// `U_i = e_iᵀ (G/n)⁻¹ [X_Sᵀ W/n − λ b]` and
/// `V_j = X_jᵀ { X_S G⁻¹ λ b − [X_S G⁻¹ X_Sᵀ − I] W/n }`.
pub fn compute_uv(
    x: &Matrix,
    signal: &SparseSignal,
    w: &Vector,
    lambda: f64,
) -> Result<UvVariables> {
    let sys = support_system(x, signal, w)?;
    let n = x.nrows() as f64;
    let w_n = w / n;

    let gram_n_inv_rhs = sys.chol.solve(&(sys.xs.tr_mul(&w_n) - &sys.b * lambda)) * n;

    // X_S G⁻¹ λ b − P W/n + W/n
    let proj_w = &sys.xs * sys.chol.solve(&sys.xs.tr_mul(&w_n));
    let dir = &sys.xs * sys.chol.solve(&(&sys.b * lambda)) - proj_w + &w_n;
    let v = Vector::from_iterator(
        sys.complement.len(),
        sys.complement.iter().map(|&j| x.column(j).dot(&dir)),
    );

    Ok(UvVariables {
        u: gram_n_inv_rhs,
        v,
        b: sys.b,
        complement: sys.complement,
    })
}

/// Sample incoherence `1 − ‖X_{Sᶜ}ᵀ X_S G⁻¹‖_∞` and `Λ_min(G/n)`.
pub fn sample_incoherence(x: &Matrix, support: &[usize]) -> Result<(f64, f64)> {
    let p = x.ncols();
    if support.is_empty() || support.len() >= p || support.iter().any(|&i| i >= p) {
        return Err(Error::InvalidSparsity {
            s: support.len(),
            p,
        });
    }
    let xs = select_columns(x, support);
    let xsc = select_columns(x, &complement(support, p));
    let gram = xs.tr_mul(&xs);
    let chol = gram_cholesky(&gram)?;
    // (G⁻¹ X_Sᵀ X_{Sᶜ})ᵀ = X_{Sᶜ}ᵀ X_S G⁻¹
    let coupling = chol.solve(&xs.tr_mul(&xsc)).transpose();
    let (lmin, _) = sym_eigen_extremes(&(gram / x.nrows() as f64));
    Ok((1.0 - inf_norm(&coupling), lmin))
}

/// Population constants of `Σ` relative to a support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationConstants {
    /// `1 − ‖Σ_{SᶜS} Σ_SS⁻¹‖_∞`.
    pub epsilon: f64,
    /// `Λ_min(Σ_SS)`.
    pub c_min: f64,
    /// `Λ_max(Σ)`.
    pub c_max: f64,
    /// `‖Σ_SS⁻¹‖_∞`.
    pub d_max: f64,
}

pub fn population_constants(cov: &Covariance, support: &[usize]) -> Result<PopulationConstants> {
    let p = cov.dim();
    if support.is_empty() || support.len() >= p || support.iter().any(|&i| i >= p) {
        return Err(Error::InvalidSparsity {
            s: support.len(),
            p,
        });
    }
    let sigma = cov.matrix();
    let comp = complement(support, p);
    let sigma_ss = submatrix(sigma, support, support);
    let chol = nalgebra::linalg::Cholesky::new(sigma_ss.clone()).ok_or(Error::SingularSubmatrix)?;
    let sigma_ss_inv = chol.inverse();
    let coupling = submatrix(sigma, &comp, support) * &sigma_ss_inv;
    let (c_min, _) = sym_eigen_extremes(&sigma_ss);
    let c_max = if cov.is_identity() {
        1.0
    } else {
        sym_eigen_extremes(sigma).1
    };
    Ok(PopulationConstants {
        epsilon: 1.0 - inf_norm(&coupling),
        c_min,
        c_max,
        d_max: inf_norm(&sigma_ss_inv),
    })
}

/// Sample and population incoherence quantities side by side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignConditionReport {
    pub epsilon_sample: f64,
    pub lambda_min_sample: f64,
    pub epsilon_pop: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub d_max: f64,
}

pub fn design_report(
    x: &Matrix,
    cov: &Covariance,
    support: &[usize],
) -> Result<DesignConditionReport> {
    check_len("design columns", x.ncols(), cov.dim())?;
    let (epsilon_sample, lambda_min_sample) = sample_incoherence(x, support)?;
    let pc = population_constants(cov, support)?;
    Ok(DesignConditionReport {
        epsilon_sample,
        lambda_min_sample,
        epsilon_pop: pc.epsilon,
        c_min: pc.c_min,
        c_max: pc.c_max,
        d_max: pc.d_max,
    })
}
