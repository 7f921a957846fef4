//! Closed-form threshold constants, sample-size and regularisation
//! schedules, and the moment formulas used as Monte Carlo oracles.
//!
//! All logarithms are natural.

use crate::linalg::inf_norm;
use crate::{Error, Matrix, Result, Vector};

/// Lower and upper sample-size thresholds on the control parameter θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdPair {
    pub theta_l: f64,
    pub theta_u: f64,
}

/// ```text
/// θ_ℓ = (√C_max − √(C_max − 1/C_max))² / (C_max (2 − ε)²)
/// θ_u = C_max / (ε² C_min)
/// ```
pub fn thresholds(c_min: f64, c_max: f64, epsilon: f64) -> Result<ThresholdPair> {
    if !(c_min > 0.0 && c_min <= c_max && c_max.is_finite()) {
        return Err(Error::InvalidConstants(format!(
            "need 0 < c_min <= c_max < inf, got c_min = {c_min}, c_max = {c_max}"
        )));
    }
    if !(c_max >= 1.0) {
        return Err(Error::InvalidConstants(format!(
            "need c_max >= 1, got {c_max}"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidConstants(format!(
            "need epsilon in (0, 1], got {epsilon}"
        )));
    }
    let gap = c_max.sqrt() - (c_max - 1.0 / c_max).sqrt();
    let theta_l = gap * gap / (c_max * (2.0 - epsilon).powi(2));
    let theta_u = c_max / (epsilon * epsilon * c_min);
    debug_assert!(theta_l <= 1.0 && 1.0 <= theta_u);
    Ok(ThresholdPair { theta_l, theta_u })
}

/// `n = ⌈2θ s ln(p − s) + s + 1⌉`, never below `s + 2`.
pub fn sample_size(theta: f64, s: usize, p: usize) -> Result<usize> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "theta must be positive, got {theta}"
        )));
    }
    if s < 1 || s >= p {
        return Err(Error::InvalidSparsity { s, p });
    }
    if p - s < 2 {
        return Err(Error::DegenerateGeometry { p, s });
    }
    let raw = 2.0 * theta * s as f64 * ((p - s) as f64).ln() + s as f64 + 1.0;
    Ok((raw.ceil() as usize).max(s + 2))
}

/// `λ_n = √(ln(p − s) ln(s) / n)`.
pub fn lambda_schedule(n: usize, p: usize, s: usize) -> Result<f64> {
    if s < 2 {
        return Err(Error::DegenerateSparsity(s));
    }
    if s >= p || p - s < 2 {
        return Err(Error::DegenerateGeometry { p, s });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    Ok((((p - s) as f64).ln() * (s as f64).ln() / n as f64).sqrt())
}

/// The schedule of one sweep cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    pub theta: f64,
    pub n: usize,
    pub lambda_n: f64,
    pub s: usize,
    pub p: usize,
}

impl ScheduleParams {
    pub fn new(theta: f64, s: usize, p: usize) -> Result<Self> {
        let n = sample_size(theta, s, p)?;
        let lambda_n = lambda_schedule(n, p, s)?;
        Ok(Self {
            theta,
            n,
            lambda_n,
            s,
            p,
        })
    }
}

/// Mean and variance of the random scale factor
/// `M_n = λ² bᵀ(X_SᵀX_S)⁻¹b + Wᵀ(I − P_S)W / n²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MnMoments {
    pub mean: f64,
    pub variance: f64,
}

fn need_dof(n: usize, s: usize, extra: usize) -> Result<()> {
    if n <= s + extra {
        return Err(Error::InsufficientDof {
            n,
            needed: s + extra,
        });
    }
    Ok(())
}

/// `quad_form` is `q = bᵀ Σ_SS⁻¹ b`. Requires `n > s + 3`.
///
/// ```text
/// E[M_n]   = λ² q / (n−s−1) + σ² (n−s) / n²
/// var(M_n) = 2(n−s)σ⁴/n⁴
///          + λ⁴q² / ((n−s−1)(n−s−3)) · {1/(n−s) + (n−s−1)/(n−s) − (n−s−3)/(n−s−1)}
/// ```
pub fn mn_moments(
    lambda: f64,
    n: usize,
    s: usize,
    sigma2: f64,
    quad_form: f64,
) -> Result<MnMoments> {
    need_dof(n, s, 3)?;
    let nf = n as f64;
    let d = (n - s) as f64;
    let l2 = lambda * lambda;
    let mean = l2 * quad_form / (d - 1.0) + sigma2 * d / (nf * nf);
    let h1 = 2.0 * d * sigma2 * sigma2 / nf.powi(4);
    let bracket = 1.0 / d + (d - 1.0) / d - (d - 3.0) / (d - 1.0);
    let h2 = l2 * l2 * quad_form * quad_form / ((d - 1.0) * (d - 3.0)) * bracket;
    Ok(MnMoments {
        mean,
        variance: h1 + h2,
    })
}

/// `bᵀ A b`.
pub fn quad_form(a: &Matrix, b: &Vector) -> f64 {
    b.dot(&(a * b))
}

/// Means of `Y_i = E[U_i | X_S]` and `Y'_i = var[U_i | X_S]` together with
/// their bounds in terms of `D_max` and `C_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UStatMoments {
    pub mean_y: f64,
    pub mean_y_prime: f64,
    /// `2 D_max n λ / (n−s−1)` bounds `|E[Y_i]|`.
    pub bound_y: f64,
    /// `σ² / (C_max (n−s−1)) ≤ E[Y'_i] ≤ σ² D_max / (n−s−1)`.
    pub bounds_y_prime: (f64, f64),
}

impl UStatMoments {
    pub fn within_bounds(&self) -> bool {
        let slack = 1e-12 * (1.0 + self.bound_y);
        let (lo, hi) = self.bounds_y_prime;
        let s2 = 1e-12 * (1.0 + hi);
        self.mean_y.abs() <= self.bound_y + slack
            && lo - s2 <= self.mean_y_prime
            && self.mean_y_prime <= hi + s2
    }
}

/// Lemma-style moments for coordinate `i` of the support.
///
/// `D_max` is taken as `‖Σ_SS⁻¹‖_∞`; `c_max` is the caller's `Λ_max(Σ)`.
#[allow(clippy::too_many_arguments)]
pub fn u_stat_moments(
    lambda: f64,
    n: usize,
    s: usize,
    sigma2: f64,
    sigma_ss_inv: &Matrix,
    b: &Vector,
    i: usize,
    c_max: f64,
) -> Result<UStatMoments> {
    need_dof(n, s, 1)?;
    if sigma_ss_inv.nrows() != s || sigma_ss_inv.ncols() != s || b.len() != s || i >= s {
        return Err(Error::DimensionMismatch(format!(
            "u_stat_moments: s = {s}, Σ_SS⁻¹ is {}x{}, b has {} entries, i = {i}",
            sigma_ss_inv.nrows(),
            sigma_ss_inv.ncols(),
            b.len()
        )));
    }
    let nf = n as f64;
    let dof = (n - s - 1) as f64;
    let d_max = inf_norm(sigma_ss_inv);
    let row_b = sigma_ss_inv.row(i).transpose().dot(b);
    Ok(UStatMoments {
        mean_y: -lambda * nf / dof * row_b,
        mean_y_prime: sigma2 / dof * sigma_ss_inv[(i, i)],
        bound_y: 2.0 * d_max * nf * lambda / dof,
        bounds_y_prime: (sigma2 / (c_max * dof), sigma2 * d_max / dof),
    })
}

/// `3 √(ln k) · max_std`, an upper bound on `E max_i |X_i|` over `k`
/// centred Gaussians.
pub fn gaussian_max_bound(k: f64, max_std: f64) -> Result<f64> {
    if !(k >= 2.0) {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 variables, got {k}"
        )));
    }
    Ok(3.0 * k.ln().sqrt() * max_std)
}

/// `E[(X_SᵀX_S)⁻¹] = Σ_SS⁻¹ / (n − s − 1)` for `n` Gaussian rows.
pub fn inverse_wishart_mean(sigma_ss: &Matrix, n: usize) -> Result<Matrix> {
    let s = sigma_ss.nrows();
    need_dof(n, s, 1)?;
    let inv = nalgebra::linalg::Cholesky::new(sigma_ss.clone())
        .ok_or(Error::SingularSubmatrix)?
        .inverse();
    Ok(inv / (n - s - 1) as f64)
}

/// Extremes of the spectral density `(1−ρ²)/(1 − 2ρ cos ω + ρ²)` of the
/// Toeplitz family `ρ^|i−j|`. Every finite section has its eigenvalues
/// strictly inside `[(1−|ρ|)/(1+|ρ|), (1+|ρ|)/(1−|ρ|)]`.
pub fn toeplitz_eigen_extremes(rho: f64) -> Result<(f64, f64)> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    let r = rho.abs();
    Ok(((1.0 - r) / (1.0 + r), (1.0 + r) / (1.0 - r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn threshold_examples() {
        assert_eq!(
            thresholds(1.0, 1.0, 1.0).unwrap(),
            ThresholdPair {
                theta_l: 1.0,
                theta_u: 1.0
            }
        );
        let t = thresholds(1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(t.theta_u, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.theta_l, 4.0 / 9.0, epsilon = 1e-15);
        let t = thresholds(0.8, 1.25, 0.9).unwrap();
        assert_abs_diff_eq!(t.theta_u, 1.25 / (0.81 * 0.8), epsilon = 1e-14);
        assert_abs_diff_eq!(t.theta_u, 1.929012, epsilon = 1e-6);
    }

    #[test]
    fn threshold_preconditions() {
        for (a, b, e) in [
            (0.0, 1.0, 1.0),
            (1.2, 1.1, 1.0),
            (0.5, 0.9, 1.0),
            (1.0, 1.0, 0.0),
            (1.0, 1.0, 1.5),
        ] {
            assert!(matches!(
                thresholds(a, b, e),
                Err(Error::InvalidConstants(_))
            ));
        }
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(sample_size(1.0, 10, 128).unwrap(), 107);
        assert_eq!(sample_size(1e-12, 5, 100).unwrap(), 7);
        let (s, p) = (12usize, 200usize);
        for theta in [0.3, 0.7, 1.1] {
            let diff = sample_size(2.0 * theta, s, p).unwrap() as f64
                - sample_size(theta, s, p).unwrap() as f64;
            let log_term = 2.0 * theta * s as f64 * ((p - s) as f64).ln();
            assert!((diff - log_term).abs() <= 1.0);
        }
        assert!(matches!(
            sample_size(1.0, 9, 10),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn lambda_examples() {
        assert_abs_diff_eq!(
            lambda_schedule(107, 128, 10).unwrap(),
            0.32041018,
            epsilon = 1e-8
        );
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let l = lambda_schedule(n, 128, 10).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(matches!(
            lambda_schedule(10, 128, 1),
            Err(Error::DegenerateSparsity(1))
        ));
    }

    #[test]
    fn mn_examples() {
        let m = mn_moments(0.3, 50, 5, 0.25, 5.0).unwrap();
        assert_abs_diff_eq!(m.mean, 0.45 / 44.0 + 0.25 * 45.0 / 2500.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mean, 0.0147273, epsilon = 1e-7);

        let m = mn_moments(0.0, 50, 5, 0.25, 5.0).unwrap();
        assert_abs_diff_eq!(m.mean, 0.25 * 45.0 / 2500.0, epsilon = 1e-16);
        assert_abs_diff_eq!(
            m.variance,
            2.0 * 45.0 * 0.0625 / 50f64.powi(4),
            epsilon = 1e-18
        );

        assert_eq!(
            mn_moments(0.0, 50, 5, 0.0, 5.0).unwrap(),
            MnMoments {
                mean: 0.0,
                variance: 0.0
            }
        );
        assert!(matches!(
            mn_moments(0.3, 8, 5, 0.25, 5.0),
            Err(Error::InsufficientDof { .. })
        ));
    }

    #[test]
    fn mn_variance_matches_inverse_chi_square() {
        // bᵀ(X_SᵀX_S)⁻¹b = q / χ²_{n−s+1}, independent of Wᵀ(I−P)W/n² = σ² χ²_{n−s} / n².
        let (lambda, n, s, sigma2, q) = (0.7f64, 40usize, 6usize, 0.3f64, 3.5f64);
        let k = (n - s + 1) as f64;
        let var_inv_chi = 1.0 / ((k - 2.0) * (k - 4.0)) - 1.0 / (k - 2.0).powi(2);
        let expected = lambda.powi(4) * q * q * var_inv_chi
            + sigma2 * sigma2 * 2.0 * (n - s) as f64 / (n as f64).powi(4);
        let m = mn_moments(lambda, n, s, sigma2, q).unwrap();
        assert_abs_diff_eq!(m.variance, expected, epsilon = 1e-13 * expected);
    }

    #[test]
    fn u_stat_examples() {
        let inv = Matrix::identity(5, 5);
        let b = Vector::from_element(5, 1.0);
        let m = u_stat_moments(0.3, 50, 5, 0.25, &inv, &b, 0, 1.0).unwrap();
        assert_abs_diff_eq!(m.mean_y, -0.340909, epsilon = 1e-6);
        assert_abs_diff_eq!(m.mean_y, -0.3 * 50.0 / 44.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mean_y_prime, 0.25 / 44.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bound_y, 2.0 * 50.0 * 0.3 / 44.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bound_y, 0.681818, epsilon = 1e-6);
        assert!(m.within_bounds());
        assert!(matches!(
            u_stat_moments(0.3, 6, 5, 0.25, &inv, &b, 0, 1.0),
            Err(Error::InsufficientDof { .. })
        ));
    }

    #[test]
    fn gaussian_max_examples() {
        assert_abs_diff_eq!(
            gaussian_max_bound(std::f64::consts::E, 1.0).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gaussian_max_bound(100.0, 0.5).unwrap(),
            3.218949,
            epsilon = 1e-6
        );
        assert!(gaussian_max_bound(1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_wishart_examples() {
        let m = inverse_wishart_mean(&Matrix::identity(3, 3), 5).unwrap();
        assert_abs_diff_eq!(m, Matrix::identity(3, 3), epsilon = 1e-15);
        let m = inverse_wishart_mean(&Matrix::identity(2, 2), 12).unwrap();
        assert_abs_diff_eq!(m, Matrix::identity(2, 2) / 9.0, epsilon = 1e-15);
        assert!(inverse_wishart_mean(&Matrix::identity(2, 2), 3).is_err());
    }

    #[test]
    fn toeplitz_symbol_extremes() {
        assert_eq!(toeplitz_eigen_extremes(0.0).unwrap(), (1.0, 1.0));
        let (lo, hi) = toeplitz_eigen_extremes(0.1).unwrap();
        assert_abs_diff_eq!(lo, 0.818182, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 1.222222, epsilon = 1e-6);
        assert!(toeplitz_eigen_extremes(-1.0).is_err());
    }
}
