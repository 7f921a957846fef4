//! Population covariances, Gaussian designs, sparse signals and the noisy
//! linear observation model `Y = X β* + W`.
//!
//! Gaussian draws use the ziggurat sampler of `rand_distr::StandardNormal`
//! on a caller-supplied generator, so every output is a pure function of the
//! generator state.

use std::fmt;

use nalgebra::linalg::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{check_len, max_abs};
use crate::{Error, Matrix, Result, Vector};

/// Description of a population covariance `Σ` of dimension `p`.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceSpec {
    Identity {
        p: usize,
    },
    /// `Σ_ij = rho^|i-j|`.
    Toeplitz {
        p: usize,
        rho: f64,
    },
    Custom(Matrix),
}

impl CovarianceSpec {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::Identity { p } | CovarianceSpec::Toeplitz { p, .. } => *p,
            CovarianceSpec::Custom(m) => m.nrows(),
        }
    }
}

/// A realised covariance together with its lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct Covariance {
    matrix: Matrix,
    chol: Matrix,
    identity: bool,
}

impl Covariance {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Lower-triangular `L` with `L Lᵀ = Σ`.
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

pub fn build_covariance(spec: &CovarianceSpec) -> Result<Covariance> {
    match spec {
        CovarianceSpec::Identity { p } => Ok(Covariance {
            matrix: Matrix::identity(*p, *p),
            chol: Matrix::identity(*p, *p),
            identity: true,
        }),
        CovarianceSpec::Toeplitz { p, rho } => {
            if !(rho.abs() < 1.0) {
                return Err(Error::InvalidRho(*rho));
            }
            let matrix = Matrix::from_fn(*p, *p, |i, j| rho.powi(i.abs_diff(j) as i32));
            factor(matrix, *rho == 0.0)
        }
        CovarianceSpec::Custom(m) => {
            if !m.is_square() {
                return Err(Error::DimensionMismatch(format!(
                    "custom covariance is {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = max_abs(m).max(f64::MIN_POSITIVE);
            if max_abs(&(m - m.transpose())) > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite);
            }
            factor(m.clone(), false)
        }
    }
}

fn factor(matrix: Matrix, identity: bool) -> Result<Covariance> {
    let chol = Cholesky::new(matrix.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .unpack();
    Ok(Covariance {
        matrix,
        chol,
        identity,
    })
}

/// Draws `n` i.i.d. rows `x_k = L z_k`, `z_k ~ N(0, I_p)`.
pub fn sample_design<R: Rng + ?Sized>(cov: &Covariance, n: usize, rng: &mut R) -> Matrix {
    let p = cov.dim();
    let z: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let z = Matrix::from_row_slice(n, p, &z);
    if cov.is_identity() {
        z
    } else {
        z * cov.cholesky_factor().transpose()
    }
}

/// Rescales every column to squared Euclidean norm `n`.
pub fn normalize_columns(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col *= n.sqrt() / norm;
    }
    Ok(out)
}

/// True regression vector together with its support.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignal {
    beta: Vector,
    support: Vec<usize>,
    rho_min: f64,
}

impl SparseSignal {
    /// Builds a signal from an explicit vector; the support is its set of
    /// nonzero entries.
    pub fn from_beta(beta: Vector) -> Result<Self> {
        let p = beta.len();
        let support: Vec<usize> = (0..p).filter(|&i| beta[i] != 0.0).collect();
        let s = support.len();
        if s == 0 || s >= p {
            return Err(Error::InvalidSparsity { s, p });
        }
        let rho_min = support
            .iter()
            .map(|&i| beta[i].abs())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            beta,
            support,
            rho_min,
        })
    }

    pub fn beta(&self) -> &Vector {
        &self.beta
    }

    /// Sorted indices of the nonzero entries.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Smallest nonzero magnitude.
    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    /// `sgn(β*_S)` in support order.
    pub fn support_signs(&self) -> Vector {
        Vector::from_iterator(
            self.support.len(),
            self.support.iter().map(|&i| self.beta[i].signum()),
        )
    }
}

/// Uniformly random support of size `s` carrying `±magnitude` with fair,
/// independent signs.
pub fn make_signal<R: Rng + ?Sized>(
    p: usize,
    s: usize,
    magnitude: f64,
    rng: &mut R,
) -> Result<SparseSignal> {
    if s < 1 || s >= p {
        return Err(Error::InvalidSparsity { s, p });
    }
    if !(magnitude > 0.0) || !magnitude.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "signal magnitude must be positive, got {magnitude}"
        )));
    }
    let mut support = rand::seq::index::sample(rng, p, s).into_vec();
    support.sort_unstable();
    let mut beta = Vector::zeros(p);
    for &i in &support {
        beta[i] = if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        };
    }
    Ok(SparseSignal {
        beta,
        support,
        rho_min: magnitude,
    })
}

/// One draw of the observation model.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub x: Matrix,
    pub w: Vector,
    pub y: Vector,
    pub sigma2: f64,
    pub signal: SparseSignal,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Draws `W ~ N(0, σ² I_n)` and forms `Y = X β* + W`.
pub fn observe<R: Rng + ?Sized>(
    x: Matrix,
    signal: &SparseSignal,
    sigma2: f64,
    rng: &mut R,
) -> Result<ProblemInstance> {
    check_len("signal", signal.dim(), x.ncols())?;
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    let n = x.nrows();
    let w = if sigma2 == 0.0 {
        Vector::zeros(n)
    } else {
        let sigma = sigma2.sqrt();
        Vector::from_iterator(
            n,
            (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)),
        )
    };
    let y = &x * signal.beta() + &w;
    Ok(ProblemInstance {
        x,
        w,
        y,
        sigma2,
        signal: signal.clone(),
    })
}

/// How the sparsity index grows with the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `s = α p`
    Linear,
    /// `s = α p / ln(α p)`
    Sublinear,
    /// `s = α p^γ`
    FractionalPower,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Linear => "linear",
            Regime::Sublinear => "sublinear",
            Regime::FractionalPower => "fractional_power",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sparsity index `s(p)`, rounded half away from zero.
pub fn sparsity_index(regime: Regime, p: usize, alpha: f64, gamma: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if regime == Regime::FractionalPower && !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma must lie in (0,1), got {gamma}"
        )));
    }
    let ap = alpha * p as f64;
    let raw = match regime {
        Regime::Linear => ap,
        Regime::Sublinear => ap / ap.ln(),
        Regime::FractionalPower => alpha * (p as f64).powf(gamma),
    };
    let s = if raw.is_finite() {
        raw.round() as i64
    } else {
        0
    };
    if s < 1 || s >= p as i64 {
        return Err(Error::DegenerateRegime { s, p });
    }
    Ok(s as usize)
}
