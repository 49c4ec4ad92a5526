//! Model-X conditional randomization test and its private variant.
//!
//! The statistic is `T = Σ r_X,i · r_Y,i`, where `r_X` are exact residuals
//! of `x` under a known law of `X | Z` (scaled by the declared residual bound
//! and clipped to `±1`) and `r_Y` are residuals of a single kernel ridge fit
//! of `y` on `z`. The observed statistic `T_0` is ranked against `m` copies
//! computed from fresh draws of `X | Z`.

use rand::{Rng, RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{BoundedDataset, RowMatrix};
use crate::dp::private_rank;
use crate::error::TestError;
use crate::krr::{fit_targets, sensitivity_crt, FitConfig};
use crate::seed::{derive_seed, SimRng};

/// Known conditional law of `X` given `Z`.
pub trait ConditionalModel: Sync {
    /// One draw from `X | Z = z`.
    fn sample(&self, z: &[f64], rng: &mut dyn RngCore) -> f64;
    /// `E[X | Z = z]`.
    fn mean(&self, z: &[f64]) -> f64;
    /// Almost-sure bound on `|x − mean(z)|` for sampled values.
    fn residual_bound(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrtConfig {
    pub fit: FitConfig,
    /// Keep `T_0..T_m` in the result.
    pub retain_statistics: bool,
}

impl CrtConfig {
    pub fn new(fit: FitConfig) -> Self {
        Self {
            fit,
            retain_statistics: false,
        }
    }

    pub fn retain_statistics(mut self, keep: bool) -> Self {
        self.retain_statistics = keep;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrtResult {
    pub p_value: f64,
    pub rank: usize,
    pub m: usize,
    pub statistics: Option<Vec<f64>>,
    /// Sensitivity used for the private rank; `None` for the exact test.
    pub delta_t: Option<f64>,
}

impl CrtResult {
    fn from_rank(rank: usize, m: usize, statistics: Option<Vec<f64>>, delta_t: Option<f64>) -> Self {
        Self {
            p_value: rank_p_value(rank, m),
            rank,
            m,
            statistics,
            delta_t,
        }
    }
}

/// `(1 + rank) / (m + 1)`.
pub fn rank_p_value(rank: usize, m: usize) -> f64 {
    (1 + rank) as f64 / (m + 1) as f64
}

fn residual_sum(
    x: impl Iterator<Item = f64>,
    means: &[f64],
    bound: f64,
    y_residuals: &[f64],
) -> f64 {
    x.zip(means)
        .zip(y_residuals)
        .map(|((xi, mi), ry)| ((xi - mi) / bound).clamp(-1.0, 1.0) * ry)
        .sum()
}

/// `Σ r_X,i r_Y,i` with `r_X,i = clamp((x_i − mean(z_i)) / residual_bound, ±1)`.
pub fn crt_statistic(
    x: &[f64],
    cond: &dyn ConditionalModel,
    y_residuals: &[f64],
    z: &RowMatrix,
) -> Result<f64, TestError> {
    let n = x.len();
    for got in [y_residuals.len(), z.nrows()] {
        if got != n {
            return Err(TestError::DimensionMismatch { expected: n, got });
        }
    }
    let means: Vec<f64> = z.rows_iter().map(|zi| cond.mean(zi)).collect();
    Ok(residual_sum(
        x.iter().copied(),
        &means,
        validated_bound(cond)?,
        y_residuals,
    ))
}

fn validated_bound(cond: &dyn ConditionalModel) -> Result<f64, TestError> {
    let b = cond.residual_bound();
    if !(b > 0.0 && b.is_finite()) {
        return Err(TestError::InvalidParameter(format!(
            "residual bound must be positive, got {b}"
        )));
    }
    Ok(b)
}

/// `c* = |{j ≥ 1 : T_j ≥ T_0}|`.
pub fn exact_rank(statistics: &[f64]) -> usize {
    let t0 = statistics[0];
    statistics[1..].iter().filter(|&&t| t >= t0).count()
}

/// `G_γ = |{i ∈ [m] : |T_i − T_0| ≤ γ}|`.
pub fn g_gamma(statistics: &[f64], gamma: f64) -> usize {
    let t0 = statistics[0];
    statistics[1..]
        .iter()
        .filter(|&&t| (t - t0).abs() <= gamma)
        .count()
}

/// Accuracy radius `γ = 4 Δ_T ln(m/δ) / ε`.
pub fn accuracy_gamma(delta_t: f64, m: usize, delta: f64, epsilon: f64) -> f64 {
    4.0 * delta_t * (m as f64 / delta).ln() / epsilon
}

/// Computes `T_0..T_m`. `ĝ` is fitted once on `(z, y)`; copy `j` draws from
/// its own generator derived from a single base seed taken from `rng`.
pub fn crt_statistics<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    cond: &dyn ConditionalModel,
    m: usize,
    fit: &FitConfig,
    rng: &mut R,
) -> Result<Vec<f64>, TestError> {
    if m < 1 {
        return Err(TestError::InvalidParameter("m must be at least 1".into()));
    }
    let bound = validated_bound(cond)?;
    let (x, y, z) = (ds.x(), ds.y(), ds.z());
    let fitted = fit_targets(z, &[y], fit, rng)?.pop().expect("one fit");
    let r_y: Vec<f64> = y.iter().zip(&fitted.fitted).map(|(a, p)| a - p).collect();
    let means: Vec<f64> = z.rows_iter().map(|zi| cond.mean(zi)).collect();
    let base = rng.next_u64();

    let mut stats = Vec::with_capacity(m + 1);
    stats.push(residual_sum(x.iter().copied(), &means, bound, &r_y));
    let copies: Vec<f64> = (1..=m as u64)
        .into_par_iter()
        .map(|j| {
            let mut copy_rng = SimRng::seed_from_u64(derive_seed(base, &[j]));
            let draws = z.rows_iter().map(|zi| cond.sample(zi, &mut copy_rng));
            residual_sum(draws, &means, bound, &r_y)
        })
        .collect();
    stats.extend(copies);
    Ok(stats)
}

/// Exact CRT: `p* = (1 + c*) / (m + 1)`.
pub fn crt_test<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    cond: &dyn ConditionalModel,
    m: usize,
    cfg: &CrtConfig,
    rng: &mut R,
) -> Result<CrtResult, TestError> {
    let stats = crt_statistics(ds, cond, m, &cfg.fit, rng)?;
    let rank = exact_rank(&stats);
    Ok(CrtResult::from_rank(
        rank,
        m,
        cfg.retain_statistics.then_some(stats),
        None,
    ))
}

/// Private CRT: the rank of `T_0` is released through Report Noisy Max with
/// `Δ_T = sensitivity_crt(λ_floor)`.
pub fn priv_crt_test<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    cond: &dyn ConditionalModel,
    m: usize,
    epsilon: f64,
    cfg: &CrtConfig,
    rng: &mut R,
) -> Result<CrtResult, TestError> {
    if !(epsilon > 0.0) {
        return Err(crate::dp::DpError::InvalidEpsilon(epsilon).into());
    }
    let delta_t = sensitivity_crt(cfg.fit.lambda_floor)?;
    let stats = crt_statistics(ds, cond, m, &cfg.fit, rng)?;
    let rank = private_rank(&stats, 0, delta_t, epsilon, rng)?;
    Ok(CrtResult::from_rank(
        rank,
        m,
        cfg.retain_statistics.then_some(stats),
        Some(delta_t),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{rescale, Dataset};
    use crate::seed::seeded_rng;

    struct Fixed {
        mean: f64,
    }

    impl ConditionalModel for Fixed {
        fn sample(&self, _z: &[f64], rng: &mut dyn RngCore) -> f64 {
            self.mean + rng.random_range(-0.5..0.5)
        }
        fn mean(&self, _z: &[f64]) -> f64 {
            self.mean
        }
        fn residual_bound(&self) -> f64 {
            1.0
        }
    }

    fn z(n: usize) -> RowMatrix {
        RowMatrix::column((0..n).map(|i| i as f64 / n as f64).collect())
    }

    #[test]
    fn statistic_hand_values() {
        let c = Fixed { mean: 0.0 };
        let z2 = z(2);
        assert_eq!(crt_statistic(&[1.0, -1.0], &c, &[0.5, 0.5], &z2).unwrap(), 0.0);
        assert_eq!(crt_statistic(&[1.0, 1.0], &c, &[0.5, 0.5], &z2).unwrap(), 1.0);
        assert_eq!(crt_statistic(&[0.0, 0.0], &c, &[0.5, 0.5], &z2).unwrap(), 0.0);
        assert_eq!(crt_statistic(&[0.3, 0.7], &c, &[0.0, 0.0], &z2).unwrap(), 0.0);
        assert!(matches!(
            crt_statistic(&[1.0], &c, &[0.5, 0.5], &z2),
            Err(TestError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn residuals_are_clipped() {
        let c = Fixed { mean: 0.0 };
        assert_eq!(crt_statistic(&[5.0], &c, &[0.5], &z(1)).unwrap(), 0.5);
    }

    #[test]
    fn rank_helpers() {
        assert_eq!(exact_rank(&[2.0, 1.0, 0.0, -1.0]), 0);
        assert_eq!(exact_rank(&[-2.0, 1.0, 0.0, -1.0]), 3);
        assert_eq!(exact_rank(&[1.0, 1.0, 0.0]), 1);
        assert_eq!(rank_p_value(0, 19), 0.05);
        assert_eq!(rank_p_value(19, 19), 1.0);
        assert_eq!(g_gamma(&[0.0, 0.5, -0.5, 2.0], 0.5), 2);
        let g = accuracy_gamma(1.0, 19, 0.05, 2.0);
        assert!((g - 2.0 * (380f64).ln()).abs() < 1e-12);
    }

    fn dataset(n: usize, seed: u64) -> BoundedDataset {
        let mut rng = seeded_rng(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        rescale(Dataset::new(x, y, z(n)).unwrap(), 1.0, 1.0, false).unwrap()
    }

    #[test]
    fn private_matches_exact_without_noise() {
        let ds = dataset(40, 3);
        let c = Fixed { mean: 0.0 };
        let cfg = CrtConfig::new(FitConfig::fixed(10.0)).retain_statistics(true);
        for seed in 0..5 {
            let exact = crt_test(&ds, &c, 19, &cfg, &mut seeded_rng(seed)).unwrap();
            let private =
                priv_crt_test(&ds, &c, 19, f64::INFINITY, &cfg, &mut seeded_rng(seed)).unwrap();
            assert_eq!(exact.statistics, private.statistics);
            assert_eq!(exact.p_value, private.p_value);
            assert_eq!(private.delta_t, Some(sensitivity_crt(10.0).unwrap()));
        }
    }

    #[test]
    fn p_value_on_lattice() {
        let ds = dataset(30, 9);
        let c = Fixed { mean: 0.0 };
        let cfg = CrtConfig::new(FitConfig::fixed(10.0));
        let mut rng = seeded_rng(1);
        for _ in 0..20 {
            let r = priv_crt_test(&ds, &c, 9, 1.0, &cfg, &mut rng).unwrap();
            assert!(r.rank <= 9);
            assert_eq!(r.p_value, (1 + r.rank) as f64 / 10.0);
            assert!(r.statistics.is_none());
        }
    }

    #[test]
    fn invalid_inputs() {
        let ds = dataset(10, 0);
        let c = Fixed { mean: 0.0 };
        let cfg = CrtConfig::new(FitConfig::fixed(10.0));
        assert!(crt_test(&ds, &c, 0, &cfg, &mut seeded_rng(0)).is_err());
        assert!(priv_crt_test(&ds, &c, 5, 0.0, &cfg, &mut seeded_rng(0)).is_err());
    }
}
