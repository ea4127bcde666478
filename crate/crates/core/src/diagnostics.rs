//! Small Monte Carlo summaries used by the checks and the Geweke test.

use statrs::function::erf::erfc;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the mean from non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let b = batches.clamp(2, x.len().max(2));
    let size = x.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let bm: Vec<f64> = x.chunks_exact(size).take(b).map(mean).collect();
    (variance(&bm) / bm.len() as f64).sqrt()
}

/// Standard error of the mean for independent draws.
pub fn iid_se(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov statistic against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level `alpha` (0.01 or 0.05).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c / (n as f64).sqrt()
}

/// Difference of two Monte Carlo means in units of its standard error.
pub fn z_score(mean_a: f64, se_a: f64, mean_b: f64, se_b: f64) -> f64 {
    (mean_a - mean_b) / (se_a * se_a + se_b * se_b).sqrt()
}

/// `log(sum(exp(x)))` without overflow.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
