//! Small dense linear-algebra helpers shared by the other modules.

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::Dyn;

use crate::{Error, Matrix, Result, Vector};

/// Largest condition number accepted for a Gram matrix before it is
/// treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Copy of the columns of `x` listed in `cols`, in that order.
pub fn select_columns(x: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

/// Submatrix `m[rows, cols]`.
pub fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_entries(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Sorted complement of `support` in `0..p`. `support` must be sorted.
pub fn complement(support: &[usize], p: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(p - support.len());
    let mut it = support.iter().peekable();
    for i in 0..p {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Operator norm induced by the vector ∞-norm: the maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eigen_extremes(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Cholesky factor of a symmetric positive definite Gram matrix, refusing
/// matrices whose spectral condition number exceeds [`GRAM_CONDITION_LIMIT`].
pub fn gram_cholesky(gram: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    let (lo, hi) = sym_eigen_extremes(gram);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= GRAM_CONDITION_LIMIT) {
        return Err(Error::SingularGram(cond));
    }
    Cholesky::new(gram.clone()).ok_or(Error::SingularGram(cond))
}

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {got}, expected {expected}"
        )));
    }
    Ok(())
}
