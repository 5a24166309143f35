/// Central-difference gradient of `f` at `params` with step `h`.
pub fn numeric_gradient<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a| + |n|, 1e-6)`. The floor keeps coordinates whose true
/// gradient is zero from turning finite-difference rounding into a huge ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Largest per-coordinate relative error between `analytic` and a
/// central-difference estimate of the gradient of `f`.
pub fn grad_check<F>(f: F, params: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    numeric_gradient(f, params, h)
        .into_iter()
        .zip(analytic)
        .map(|(n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}
