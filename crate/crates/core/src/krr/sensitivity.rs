//! Closed-form sensitivity bounds for KRR residuals on data with `|x|, |y| ≤ 1`.

use super::KrrError;

fn check(lambda: f64) -> Result<(), KrrError> {
    if lambda > 0.0 && !lambda.is_nan() {
        Ok(())
    } else {
        Err(KrrError::NonPositiveLambda(lambda))
    }
}

/// `ℓ₁` sensitivity of the residual-product vector,
/// `4(1 + √2/√λ)(1 + √2/√λ + 4√2/λ^{3/2} + 4/λ)`.
pub fn sensitivity_gcm(lambda: f64) -> Result<f64, KrrError> {
    check(lambda)?;
    let r = std::f64::consts::SQRT_2 / lambda.sqrt();
    let l32 = lambda * lambda.sqrt();
    Ok(4.0 * (1.0 + r) * (1.0 + r + 4.0 * std::f64::consts::SQRT_2 / l32 + 4.0 / lambda))
}

/// Sensitivity of the sum of residual products when the `x` residuals are
/// exact and bounded by 1: `4(1 + √2/√λ + 2√2/λ^{3/2} + 2/λ)`.
pub fn sensitivity_crt(lambda: f64) -> Result<f64, KrrError> {
    check(lambda)?;
    let r = std::f64::consts::SQRT_2 / lambda.sqrt();
    let l32 = lambda * lambda.sqrt();
    Ok(4.0 * (1.0 + r + 2.0 * std::f64::consts::SQRT_2 / l32 + 2.0 / lambda))
}

/// Largest change of a prediction `wᵀφ(v)` when one of `n` training rows is
/// replaced: `8√2/(λ^{3/2} n) + 8/(λ n)`.
pub fn prediction_sensitivity(lambda: f64, n: usize) -> Result<f64, KrrError> {
    check(lambda)?;
    let n = n as f64;
    let l32 = lambda * lambda.sqrt();
    Ok(8.0 * std::f64::consts::SQRT_2 / (l32 * n) + 8.0 / (lambda * n))
}

/// All constants evaluated at one regularisation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityConstants {
    pub lambda: f64,
    /// `2 + 2√2/√λ`
    pub c1: f64,
    /// `8√2/λ^{3/2} + 8/λ`
    pub c2: f64,
    pub gcm_delta: f64,
    pub crt_delta: f64,
}

impl SensitivityConstants {
    pub fn at(lambda: f64) -> Result<Self, KrrError> {
        check(lambda)?;
        let s2 = std::f64::consts::SQRT_2;
        let c1 = 2.0 + 2.0 * s2 / lambda.sqrt();
        let c2 = 8.0 * s2 / (lambda * lambda.sqrt()) + 8.0 / lambda;
        Ok(Self {
            lambda,
            c1,
            c2,
            gcm_delta: sensitivity_gcm(lambda)?,
            crt_delta: sensitivity_crt(lambda)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert!((sensitivity_gcm(2.0).unwrap() - 48.0).abs() < 1e-12);
        assert!((sensitivity_crt(2.0).unwrap() - 16.0).abs() < 1e-12);
        // Reference values from a 40-digit evaluation of the same formulas.
        assert!((sensitivity_gcm(10.0).unwrap() - 11.728_792_269_599_529).abs() < 1e-12);
        assert!((sensitivity_crt(10.0).unwrap() - 6.946_625_258_399_798).abs() < 1e-12);
    }

    #[test]
    fn large_lambda_limit_is_four() {
        assert!((sensitivity_gcm(1e12).unwrap() - 4.0).abs() < 1e-4);
        assert!((sensitivity_crt(1e12).unwrap() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn constants_factor_the_bounds() {
        for lambda in [0.3, 2.0, 10.0, 1e3] {
            let c = SensitivityConstants::at(lambda).unwrap();
            assert!(c.c1 > 2.0 && c.c2 > 0.0);
            assert!((c.gcm_delta - (c.c1 * c.c1 + c.c1 * c.c2)).abs() < 1e-9 * c.gcm_delta);
            assert!((c.crt_delta - (2.0 * c.c1 + c.c2)).abs() < 1e-9 * c.crt_delta);
            assert!(c.gcm_delta >= 4.0 && c.crt_delta >= 4.0);
        }
    }

    #[test]
    fn monotone_decreasing_on_log_grid() {
        let grid: Vec<f64> = (0..=50).map(|i| 10f64.powf(-1.0 + 5.0 * i as f64 / 50.0)).collect();
        for w in grid.windows(2) {
            assert!(sensitivity_gcm(w[1]).unwrap() < sensitivity_gcm(w[0]).unwrap());
            assert!(sensitivity_crt(w[1]).unwrap() < sensitivity_crt(w[0]).unwrap());
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(sensitivity_gcm(0.0).is_err());
        assert!(sensitivity_crt(-1.0).is_err());
        assert!(sensitivity_gcm(f64::NAN).is_err());
    }
}
