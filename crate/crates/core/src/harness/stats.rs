use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::HarnessError;
use crate::gcm::normal_cdf;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: usize,
    pub total: usize,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // Clamp so the interval always contains the point estimate despite rounding.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Fraction of p-values at or below `alpha`, with a Wilson 95% interval.
pub fn rejection_rate(p_values: &[f64], alpha: f64) -> Result<RateEstimate, HarnessError> {
    if p_values.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(HarnessError::InvalidConfig(format!("p-value {p} outside [0, 1]")));
    }
    let k = p_values.iter().filter(|&&p| p <= alpha).count();
    Ok(rate_from_counts(k, p_values.len()))
}

pub fn rate_from_counts(k: usize, n: usize) -> RateEstimate {
    let (ci_low, ci_high) = wilson_interval(k, n, Z_95);
    RateEstimate {
        rate: if n == 0 { 0.0 } else { k as f64 / n as f64 },
        ci_low,
        ci_high,
        successes: k,
        total: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityCheck {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub passed: bool,
    pub counts: Vec<usize>,
}

/// Significance level of [`uniformity_check`].
pub const UNIFORMITY_LEVEL: f64 = 0.01;

/// Chi-square goodness of fit of p-values against the uniform law on
/// `{1/(m+1), ..., 1}`.
pub fn uniformity_check(p_values: &[f64], m: usize) -> Result<UniformityCheck, HarnessError> {
    if p_values.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    if m < 1 {
        return Err(HarnessError::InvalidConfig("m must be at least 1".into()));
    }
    let cells = m + 1;
    let mut counts = vec![0usize; cells];
    for &p in p_values {
        let k = p * cells as f64;
        let r = k.round();
        if !((k - r).abs() < 1e-9 && r >= 1.0 && r <= cells as f64) {
            return Err(HarnessError::OffLatticeValue(p));
        }
        counts[r as usize - 1] += 1;
    }
    let expected = p_values.len() as f64 / cells as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let chi = ChiSquared::new(m as f64).expect("positive degrees of freedom");
    let p_value = (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0);
    Ok(UniformityCheck {
        statistic,
        degrees_of_freedom: m,
        p_value,
        passed: p_value >= UNIFORMITY_LEVEL,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS distance `d` from `n` observations, with the
/// usual small-sample correction of the argument.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, HarnessError> {
    if sample.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let statistic = ks_statistic(sample, cdf);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_p_value(statistic, sample.len()),
    })
}

/// KS test against the standard normal law.
pub fn ks_normal(sample: &[f64]) -> Result<KsResult, HarnessError> {
    ks_test(sample, normal_cdf)
}

/// Sample mean and unbiased variance; `None` for fewer than two values.
pub fn mean_variance(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var))
}
