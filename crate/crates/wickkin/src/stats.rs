//! Small statistics helpers with fixed summation order.

/// Mean and standard error of the mean (`s/√n`, the delete-one jackknife
/// error for the mean).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (v / n as f64).sqrt())
}

/// Delete-one jackknife standard error of `stat` over `n` samples.
pub fn jackknife<F: FnMut(Option<usize>) -> f64>(n: usize, mut stat: F) -> (f64, f64) {
    let full = stat(None);
    let loo: Vec<f64> = (0..n).map(|i| stat(Some(i))).collect();
    let nf = n as f64;
    let m = loo.iter().sum::<f64>() / nf;
    let v = loo.iter().map(|x| (x - m).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    (full, v.sqrt())
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(n: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut term = (1.0 - p).powi(n as i32);
    let mut cdf = 0.0;
    for j in 0..k {
        cdf += term;
        term *= (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
    }
    (1.0 - cdf).max(0.0)
}

/// Two-sided normal tail `P(|Z| > z)`.
pub fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z / std::f64::consts::SQRT_2)
}
