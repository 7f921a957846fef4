//! Test helpers shared by integration tests: an exhaustive lasso oracle and
//! small seeded instances.
#![allow(dead_code)]

use lasso_lab::ensemble::{
    build_covariance, make_signal, observe, sample_design, CovarianceSpec, ProblemInstance,
};
use lasso_lab::{Matrix, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(1/2n)‖y − Xβ‖² + λ‖β‖₁`, written out independently of the library.
pub fn lasso_objective(x: &Matrix, y: &Vector, lambda: f64, beta: &Vector) -> f64 {
    let n = x.nrows();
    let mut rss = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for j in 0..x.ncols() {
            fit += x[(i, j)] * beta[j];
        }
        rss += (y[i] - fit).powi(2);
    }
    rss / (2.0 * n as f64) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Global lasso minimizer by enumerating every sign pattern in
/// `{−1, 0, +1}^p`. For each pattern `z` with active set `A`, the stationary
/// point `β_A = (X_AᵀX_A/n)⁻¹(X_Aᵀy/n − λ z_A)` is a candidate when its signs
/// agree with `z_A`. Requires `X_AᵀX_A` invertible for every `A`.
pub fn exhaustive_lasso(x: &Matrix, y: &Vector, lambda: f64) -> (Vector, f64) {
    let (n, p) = x.shape();
    assert!(p <= 16, "enumeration is exponential in p");
    let nf = n as f64;
    let gram = x.transpose() * x / nf;
    let corr = x.transpose() * y / nf;

    let mut best = Vector::zeros(p);
    let mut best_obj = lasso_objective(x, y, lambda, &best);
    for mask in 1u32..(1 << p) {
        let active: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = active.len();
        let g = Matrix::from_fn(k, k, |a, b| gram[(active[a], active[b])]);
        let lu = g.lu();
        for signs in 0u32..(1 << k) {
            let z: Vec<f64> = (0..k)
                .map(|a| if signs >> a & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let rhs = Vector::from_fn(k, |a, _| corr[active[a]] - lambda * z[a]);
            let Some(sol) = lu.solve(&rhs) else { continue };
            if (0..k).any(|a| sol[a] * z[a] <= 0.0) {
                continue;
            }
            let mut beta = Vector::zeros(p);
            for (a, &j) in active.iter().enumerate() {
                beta[j] = sol[a];
            }
            let obj = lasso_objective(x, y, lambda, &beta);
            if obj < best_obj {
                best_obj = obj;
                best = beta;
            }
        }
    }
    (best, best_obj)
}

/// Identity-covariance instance with `s` coefficients of magnitude
/// `magnitude`, fully determined by `seed`.
pub fn seeded_instance(
    seed: u64,
    n: usize,
    p: usize,
    s: usize,
    sigma2: f64,
    magnitude: f64,
) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = build_covariance(&CovarianceSpec::Identity { p }).unwrap();
    let signal = make_signal(p, s, magnitude, &mut rng).unwrap();
    let x = sample_design(&cov, n, &mut rng);
    observe(x, &signal, sigma2, &mut rng).unwrap()
}
