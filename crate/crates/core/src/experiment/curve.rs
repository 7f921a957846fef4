//! Binomial intervals and summaries of empirical success curves.

/// Wilson score interval for `successes` out of `trials`, clipped to [0, 1].
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    assert!(
        trials >= 1 && successes <= trials,
        "need 0 <= successes <= trials, trials >= 1"
    );
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Weighted least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, c)| std::iter::repeat_n(m, c))
        .collect()
}

/// First `x` at which the piecewise-linear curve through `(xs, ys)` reaches
/// `level`. `xs` must be increasing.
pub fn first_crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if ys.first()? >= &level {
        return Some(xs[0]);
    }
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        (y[0] < level && y[1] >= level)
            .then(|| x[0] + (level - y[0]) / (y[1] - y[0]) * (x[1] - x[0]))
    })
}

/// θ-width of the band where the monotone-smoothed success curve climbs from
/// `lo` to `hi`. `None` if the curve never reaches `hi`.
pub fn transition_width(
    thetas: &[f64],
    p_hat: &[f64],
    trials: &[f64],
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let smooth = isotonic(p_hat, trials);
    let a = first_crossing(thetas, &smooth, lo)?;
    let b = first_crossing(thetas, &smooth, hi)?;
    Some(b - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_examples() {
        assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
        assert_eq!(wilson_interval(10, 10, 1.96).1, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert_abs_diff_eq!(lo, 0.40383, epsilon = 5e-6);
        assert_abs_diff_eq!(hi, 0.59617, epsilon = 5e-6);
        let (lo, hi) = wilson_interval(100, 200, 1.96);
        assert_abs_diff_eq!(lo, 0.431360, epsilon = 5e-7);
        assert_abs_diff_eq!(hi, 0.568640, epsilon = 5e-7);
    }

    #[test]
    fn pava() {
        let fit = isotonic(&[0.0, 0.3, 0.2, 0.5, 0.4, 1.0], &[1.0; 6]);
        let expected = [0.0, 0.25, 0.25, 0.45, 0.45, 1.0];
        for (a, b) in fit.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(fit.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn crossings() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 0.4, 0.8];
        assert_abs_diff_eq!(first_crossing(&xs, &ys, 0.6).unwrap(), 1.5, epsilon = 1e-15);
        assert_eq!(first_crossing(&xs, &ys, 0.9), None);
        assert_abs_diff_eq!(
            transition_width(&xs, &ys, &[1.0; 3], 0.2, 0.6).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }
}
