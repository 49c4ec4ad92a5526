//! The generalised covariance measure and its private variant.
//!
//! Both tests regress `x` and `y` on `z`, multiply the residuals and normalise
//! the mean of the products. The private test adds Laplace noise calibrated
//! to the `ℓ₁` sensitivity of the product vector before normalising; the rest
//! of the pipeline only post-processes the noisy vector.

use rand::Rng;
use serde::Serialize;
use libm::erfc;

use crate::dataset::BoundedDataset;
use crate::dp::{laplace_mechanism, PrivacyParams};
use crate::error::TestError;
use crate::krr::{fit_targets, sensitivity_gcm, FitConfig, Regressor};
use crate::synth::GroundTruth;

/// Relative tolerance on the standard deviation of the residual products.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    // Evaluate the smaller tail directly; erfc is relatively accurate there.
    let tail = 0.5 * erfc(t.abs() / std::f64::consts::SQRT_2);
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Two-sided Gaussian p-value `2(1 − Φ(|t|))`, clamped to `[0, 1]`.
pub fn two_sided_p_value(t: f64) -> f64 {
    (2.0 * normal_cdf(-t.abs())).clamp(0.0, 1.0)
}

/// `(n^{-1/2} Σ R_i) / sqrt(n^{-1} Σ R_i² − (n^{-1} Σ R_i)²)`.
///
/// The denominator is computed with a two-pass variance. Inputs whose
/// standard deviation is below `1e-12` times their root mean square are
/// rejected as degenerate.
pub fn gcm_statistic(r: &[f64]) -> Result<f64, TestError> {
    let n = r.len();
    if n < 2 {
        return Err(TestError::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = r.iter().sum::<f64>() / nf;
    let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let sd = var.sqrt();
    if !(sd > DEGENERATE_TOLERANCE * rms) || !sd.is_finite() {
        return Err(TestError::DegenerateVariance);
    }
    Ok(nf.sqrt() * mean / sd)
}

/// GCM configuration: the regression procedure and whether to fit on the
/// first half of the rows and evaluate residuals on the second half.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GcmConfig {
    pub fit: FitConfig,
    pub split: bool,
}

impl GcmConfig {
    pub fn new(fit: FitConfig) -> Self {
        Self { fit, split: false }
    }

    pub fn split(mut self, split: bool) -> Self {
        self.split = split;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcmResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Laplace scale `Δ/ε`; zero for the non-private test.
    pub noise_scale: f64,
    /// λ selected for the `x` and `y` regressions (`None` for a zero fit).
    pub lambda_x: Option<f64>,
    pub lambda_y: Option<f64>,
    /// λ at which the sensitivity was evaluated (the public floor).
    pub sensitivity_lambda: f64,
    /// Number of residual products entering the statistic.
    pub n: usize,
}

/// Residuals of both regressions and their products.
#[derive(Debug, Clone)]
pub struct ResidualProducts {
    pub r_x: Vec<f64>,
    pub r_y: Vec<f64>,
    pub products: Vec<f64>,
    pub fit_x: Regressor,
    pub fit_y: Regressor,
}

/// Fits `f̂` and `ĝ` and returns `R_i = (x_i − f̂(z_i))(y_i − ĝ(z_i))`.
pub fn residual_products<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    cfg: &GcmConfig,
    rng: &mut R,
) -> Result<ResidualProducts, TestError> {
    let n = ds.len();
    let (x, y, z) = (ds.x(), ds.y(), ds.z());
    let (r_x, r_y, fit_x, fit_y) = if cfg.split {
        if n < 4 {
            return Err(TestError::TooFewSamples { needed: 4, got: n });
        }
        let half = n / 2;
        let train: Vec<usize> = (0..half).collect();
        let eval: Vec<usize> = (half..n).collect();
        let z_train = z.select_rows(&train);
        let z_eval = z.select_rows(&eval);
        let mut fits = fit_targets(&z_train, &[&x[..half], &y[..half]], &cfg.fit, rng)?;
        let fit_y = fits.pop().expect("two fits").regressor;
        let fit_x = fits.pop().expect("two fits").regressor;
        let px = fit_x.predict_many(&z_eval)?;
        let py = fit_y.predict_many(&z_eval)?;
        let r_x: Vec<f64> = x[half..].iter().zip(px).map(|(a, p)| a - p).collect();
        let r_y: Vec<f64> = y[half..].iter().zip(py).map(|(a, p)| a - p).collect();
        (r_x, r_y, fit_x, fit_y)
    } else {
        let mut fits = fit_targets(z, &[x, y], &cfg.fit, rng)?;
        let fy = fits.pop().expect("two fits");
        let fx = fits.pop().expect("two fits");
        let r_x: Vec<f64> = x.iter().zip(&fx.fitted).map(|(a, p)| a - p).collect();
        let r_y: Vec<f64> = y.iter().zip(&fy.fitted).map(|(a, p)| a - p).collect();
        (r_x, r_y, fx.regressor, fy.regressor)
    };
    let products = r_x.iter().zip(&r_y).map(|(a, b)| a * b).collect();
    Ok(ResidualProducts {
        r_x,
        r_y,
        products,
        fit_x,
        fit_y,
    })
}

/// Non-private GCM test with a two-sided Gaussian p-value.
pub fn gcm_test<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    cfg: &GcmConfig,
    rng: &mut R,
) -> Result<GcmResult, TestError> {
    let rp = residual_products(ds, cfg, rng)?;
    let statistic = gcm_statistic(&rp.products)?;
    Ok(GcmResult {
        statistic,
        p_value: two_sided_p_value(statistic),
        noise_scale: 0.0,
        lambda_x: rp.fit_x.lambda(),
        lambda_y: rp.fit_y.lambda(),
        sensitivity_lambda: cfg.fit.lambda_floor,
        n: rp.products.len(),
    })
}

/// Privacy parameters for the residual-product vector: `Δ` is always the
/// sensitivity at the public λ floor.
pub fn gcm_privacy(epsilon: f64, lambda_floor: f64) -> Result<PrivacyParams, TestError> {
    Ok(PrivacyParams::new(epsilon, sensitivity_gcm(lambda_floor)?)?)
}

/// Private GCM: Laplace(Δ/ε) noise on each residual product, then the usual
/// statistic and two-sided p-value on the noisy vector.
pub fn priv_gcm_test<R: Rng + ?Sized>(
    ds: &BoundedDataset,
    epsilon: f64,
    cfg: &GcmConfig,
    rng: &mut R,
) -> Result<GcmResult, TestError> {
    let pp = gcm_privacy(epsilon, cfg.fit.lambda_floor)?;
    let rp = residual_products(ds, cfg, rng)?;
    let noisy = laplace_mechanism(&rp.products, &pp, rng)?;
    let statistic = gcm_statistic(&noisy)?;
    Ok(GcmResult {
        statistic,
        p_value: two_sided_p_value(statistic),
        noise_scale: pp.laplace_scale(),
        lambda_x: rp.fit_x.lambda(),
        lambda_y: rp.fit_y.lambda(),
        sensitivity_lambda: cfg.fit.lambda_floor,
        n: noisy.len(),
    })
}

/// Predicted mean `√n ρ / σ'` of the private statistic under an alternative,
/// with `σ' = sqrt(σ² + (√2 a b Δ / ε)²)` and `Δ = sensitivity_gcm(λ)`.
/// `ρ` and `σ` are on the original (unrescaled) scale; `n` is the number of
/// residual products.
pub fn power_shift(
    gt: &GroundTruth,
    n: usize,
    epsilon: f64,
    a: f64,
    b: f64,
    lambda: f64,
) -> Result<f64, TestError> {
    let delta = sensitivity_gcm(lambda)?;
    let noise = std::f64::consts::SQRT_2 * a * b * delta / epsilon;
    let sigma_priv = (gt.sigma() * gt.sigma() + noise * noise).sqrt();
    Ok((n as f64).sqrt() * gt.rho() / sigma_priv)
}
