//! Differential-privacy primitives: the Laplace mechanism, Report Noisy Max
//! with one-sided exponential noise, and private rank selection.
//!
//! Every sampler takes an explicit generator. Continuous variates are drawn by
//! inverse-CDF transforms of a single uniform so that a seed fully determines
//! the output on every platform.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("sensitivity must be positive and finite, got {0}")]
    InvalidSensitivity(f64),
    #[error("score vector is empty")]
    EmptyScores,
    #[error("index {index} out of range for {len} values")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite input at position {0}")]
    NonFinite(usize),
}

/// Privacy budget and the sensitivity of the query it protects. An infinite
/// epsilon is accepted and means "no noise".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    sensitivity: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, sensitivity: f64) -> Result<Self, DpError> {
        if !(epsilon > 0.0) {
            return Err(DpError::InvalidEpsilon(epsilon));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(DpError::InvalidSensitivity(sensitivity));
        }
        Ok(Self {
            epsilon,
            sensitivity,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Laplace scale `Δ/ε`.
    pub fn laplace_scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// Uniform on the open interval (0, 1).
#[inline]
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One draw from Laplace(0, `scale`) via the inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = open_uniform(rng) - 0.5;
    if scale == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One draw from the exponential distribution with mean `scale`.
pub fn sample_exponential<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = open_uniform(rng);
    if scale == 0.0 {
        return 0.0;
    }
    -scale * u.ln()
}

/// CDF of Laplace(0, `scale`).
pub fn laplace_cdf(t: f64, scale: f64) -> f64 {
    if t < 0.0 {
        0.5 * (t / scale).exp()
    } else {
        1.0 - 0.5 * (-t / scale).exp()
    }
}

/// Adds independent Laplace(0, Δ/ε) noise to every coordinate.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    values: &[f64],
    pp: &PrivacyParams,
    rng: &mut R,
) -> Result<Vec<f64>, DpError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DpError::NonFinite(i));
    }
    let scale = pp.laplace_scale();
    Ok(values
        .iter()
        .map(|v| v + sample_laplace(scale, rng))
        .collect())
}

/// Returns `argmax_i (scores_i + Z_i)` with `Z_i ~ Exp(mean 2/ε)`. Ties go to
/// the lowest index. Scores must come from a score function of sensitivity
/// at most 1 for the output to be ε-DP.
pub fn report_noisy_max<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DpError> {
    if scores.is_empty() {
        return Err(DpError::EmptyScores);
    }
    if !(epsilon > 0.0) {
        return Err(DpError::InvalidEpsilon(epsilon));
    }
    let scale = 2.0 / epsilon;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        let v = s + sample_exponential(scale, rng);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// Scores `s_k(c) = −|Q_c − T_k| / (2Δ_T)` for every candidate rank `c`,
/// where `Q` holds the values sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScores {
    pub scores: Vec<f64>,
    pub target_index: usize,
    pub delta_t: f64,
}

/// Sorts `values` in decreasing order, keeping the original order among ties.
pub fn sorted_decreasing(values: &[f64]) -> Vec<f64> {
    let mut q = values.to_vec();
    // `sort_by` is stable, so equal values keep their original relative order.
    q.sort_by(|a, b| b.total_cmp(a));
    q
}

pub fn rank_scores(values: &[f64], k: usize, delta_t: f64) -> Result<RankScores, DpError> {
    if k >= values.len() {
        return Err(DpError::IndexOutOfRange {
            index: k,
            len: values.len(),
        });
    }
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(DpError::InvalidSensitivity(delta_t));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DpError::NonFinite(i));
    }
    let target = values[k];
    let scores = sorted_decreasing(values)
        .into_iter()
        .map(|q| -(q - target).abs() / (2.0 * delta_t))
        .collect();
    Ok(RankScores {
        scores,
        target_index: k,
        delta_t,
    })
}

/// Privately estimates the rank of `values[k]` in decreasing order, for
/// queries whose individual sensitivity is at most `delta_t`.
pub fn private_rank<R: Rng + ?Sized>(
    values: &[f64],
    k: usize,
    delta_t: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DpError> {
    let s = rank_scores(values, k, delta_t)?;
    report_noisy_max(&s.scores, epsilon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(0.0, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, 0.0).is_err());
        assert!(PrivacyParams::new(f64::INFINITY, 1.0).is_ok());
        assert_eq!(PrivacyParams::new(1.0, 1.0).unwrap().laplace_scale(), 1.0);
        assert_eq!(PrivacyParams::new(4.0, 2.0).unwrap().laplace_scale(), 0.5);
    }

    #[test]
    fn infinite_epsilon_adds_no_noise() {
        let pp = PrivacyParams::new(f64::INFINITY, 3.0).unwrap();
        let v = [1.0, -2.5, 0.25];
        assert_eq!(laplace_mechanism(&v, &pp, &mut rng(1)).unwrap(), v.to_vec());
    }

    #[test]
    fn laplace_is_seed_deterministic() {
        let pp = PrivacyParams::new(1.0, 1.0).unwrap();
        let a = laplace_mechanism(&[0.0; 8], &pp, &mut rng(5)).unwrap();
        let b = laplace_mechanism(&[0.0; 8], &pp, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn laplace_rejects_non_finite() {
        let pp = PrivacyParams::new(1.0, 1.0).unwrap();
        assert_eq!(
            laplace_mechanism(&[0.0, f64::NAN], &pp, &mut rng(0)).unwrap_err(),
            DpError::NonFinite(1)
        );
    }

    #[test]
    fn rnm_single_candidate_and_empty() {
        let mut r = rng(2);
        for _ in 0..100 {
            assert_eq!(report_noisy_max(&[-5.0], 0.1, &mut r).unwrap(), 0);
        }
        assert_eq!(report_noisy_max(&[], 1.0, &mut r).unwrap_err(), DpError::EmptyScores);
    }

    #[test]
    fn rnm_without_noise_is_argmax_lowest_index() {
        let mut r = rng(3);
        assert_eq!(
            report_noisy_max(&[-1.0, 0.0, 0.0, -3.0], f64::INFINITY, &mut r).unwrap(),
            1
        );
    }

    #[test]
    fn rank_scores_hand_example() {
        let s = rank_scores(&[3.0, 1.0, 2.0], 0, 0.5).unwrap();
        assert_eq!(s.scores, vec![0.0, -1.0, -2.0]);
        let eq = rank_scores(&[4.0; 5], 3, 1.0).unwrap();
        assert!(eq.scores.iter().all(|&v| v == 0.0));
        let top = rank_scores(&[0.1, 9.0, 0.3], 1, 2.0).unwrap();
        assert_eq!(top.scores[0], 0.0);
        assert!(top.scores.iter().all(|&v| v <= 0.0));
        assert_eq!(
            rank_scores(&[1.0], 1, 1.0).unwrap_err(),
            DpError::IndexOutOfRange { index: 1, len: 1 }
        );
    }

    #[test]
    fn private_rank_zero_noise_limit() {
        let values = [0.3, 2.0, -1.0, 0.9, 0.5];
        // Decreasing order: 2.0, 0.9, 0.5, 0.3, -1.0 → value 0.3 sits at rank 3.
        assert_eq!(private_rank(&values, 0, 1.0, f64::INFINITY, &mut rng(0)).unwrap(), 3);
        assert_eq!(private_rank(&values, 1, 1.0, f64::INFINITY, &mut rng(0)).unwrap(), 0);
    }

    #[test]
    fn sorted_decreasing_is_stable() {
        assert_eq!(sorted_decreasing(&[1.0, 3.0, 2.0, 3.0]), vec![3.0, 3.0, 2.0, 1.0]);
    }
}
