//! Synthetic benchmark model with known conditional structure:
//!
//! ```text
//! Z_1..Z_d ~ N(0, var_z),  X = f_s(Z_1) + N_X,  Y = −f_s(Z_1) + N_Y + β N_X
//! ```
//!
//! with `N_X, N_Y ~ N(0, 1)` and `f_s(z) = exp(−s²/2) sin(s z)`. `X ⊥ Y | Z`
//! holds exactly when `β = 0`. The true residuals are `χ = N_X` and
//! `ξ = N_Y + β N_X`, so `E[χξ] = β` and `Var(χξ) = 1 + 2β²`.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::crt::ConditionalModel;
use crate::dataset::{infer_bound, rescale, BoundedDataset, Dataset, RowMatrix};
use crate::error::TestError;
use crate::krr::Regressor;

pub const DEFAULT_VAR_Z: f64 = 4.0;
/// Constant `C` in the `sqrt(C ln n)` rescaling bound.
pub const DEFAULT_BOUND_C: f64 = 4.0;

pub fn f_s(z: f64, s: f64) -> f64 {
    (-0.5 * s * s).exp() * (s * z).sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub beta: f64,
    pub var_z: f64,
    pub bound_c: f64,
}

impl SynthParams {
    pub fn new(n: usize, d: usize, s: f64, beta: f64) -> Self {
        Self {
            n,
            d,
            s,
            beta,
            var_z: DEFAULT_VAR_Z,
            bound_c: DEFAULT_BOUND_C,
        }
    }

    pub fn validate(&self) -> Result<(), TestError> {
        let bad = |m: &str| Err(TestError::InvalidParameter(m.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.d < 1 {
            return bad("d must be at least 1");
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return bad("s must be non-negative");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if !(self.var_z > 0.0 && self.var_z.is_finite()) {
            return bad("var_z must be positive");
        }
        if !(self.bound_c > 0.0 && self.bound_c.is_finite()) {
            return bad("bound constant must be positive");
        }
        Ok(())
    }
}

/// Oracle quantities of the synthetic model, on the original scale unless the
/// method name says otherwise. "Rescaled" quantities refer to the emitted
/// dataset, where `x` was divided by `scale_x` and `y` by `scale_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    s: f64,
    beta: f64,
    scale_x: f64,
    scale_y: f64,
    bound: f64,
}

impl GroundTruth {
    pub fn new(s: f64, beta: f64, scale_x: f64, scale_y: f64, bound: f64) -> Self {
        Self {
            s,
            beta,
            scale_x,
            scale_y,
            bound,
        }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `E[X | Z = z]`.
    pub fn f_p(&self, z: &[f64]) -> f64 {
        f_s(z[0], self.s)
    }

    /// `E[Y | Z = z]`; the `β N_X` term has mean zero.
    pub fn g_p(&self, z: &[f64]) -> f64 {
        -f_s(z[0], self.s)
    }

    /// `u_P(z) = E[χ² | Z = z]`.
    pub fn cond_var_x(&self) -> f64 {
        1.0
    }

    /// `v_P(z) = E[ξ² | Z = z]`.
    pub fn cond_var_y(&self) -> f64 {
        1.0 + self.beta * self.beta
    }

    /// Signal `ρ = E[χξ]`.
    pub fn rho(&self) -> f64 {
        self.beta
    }

    /// Noise `σ = sqrt(Var(χξ))`.
    pub fn sigma(&self) -> f64 {
        (1.0 + 2.0 * self.beta * self.beta).sqrt()
    }

    pub fn scale_x(&self) -> f64 {
        self.scale_x
    }

    pub fn scale_y(&self) -> f64 {
        self.scale_y
    }

    /// Raw-scale bound `sqrt(C ln n)` used for rescaling and for clipping
    /// resampled residuals.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn f_rescaled(&self, z: &[f64]) -> f64 {
        self.f_p(z) / self.scale_x
    }

    pub fn g_rescaled(&self, z: &[f64]) -> f64 {
        self.g_p(z) / self.scale_y
    }

    pub fn cond_var_x_rescaled(&self) -> f64 {
        self.cond_var_x() / (self.scale_x * self.scale_x)
    }

    pub fn cond_var_y_rescaled(&self) -> f64 {
        self.cond_var_y() / (self.scale_y * self.scale_y)
    }

    pub fn rho_rescaled(&self) -> f64 {
        self.rho() / (self.scale_x * self.scale_y)
    }

    pub fn sigma_rescaled(&self) -> f64 {
        self.sigma() / (self.scale_x * self.scale_y)
    }
}

/// Draws one dataset and rescales `x` and `y` by `sqrt(C ln n)` with clipping.
pub fn generate<R: Rng + ?Sized>(
    p: &SynthParams,
    rng: &mut R,
) -> Result<(BoundedDataset, GroundTruth), TestError> {
    p.validate()?;
    let sd_z = p.var_z.sqrt();
    let mut x = Vec::with_capacity(p.n);
    let mut y = Vec::with_capacity(p.n);
    let mut z = Vec::with_capacity(p.n * p.d);
    for _ in 0..p.n {
        let start = z.len();
        for _ in 0..p.d {
            let g: f64 = rng.sample(StandardNormal);
            z.push(sd_z * g);
        }
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let f = f_s(z[start], p.s);
        x.push(f + nx);
        y.push(-f + ny + p.beta * nx);
    }
    let bound = infer_bound(p.n as f64, p.bound_c)?;
    let ds = Dataset::new(x, y, RowMatrix::new(p.n, p.d, z)?)?;
    let bounded = rescale(ds, bound, bound, true)?;
    Ok((bounded, GroundTruth::new(p.s, p.beta, bound, bound, bound)))
}

/// Exact law of `X | Z` for the synthetic model, on the rescaled scale.
/// Residuals of resampled values are clipped to `±residual_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConditional {
    s: f64,
    scale: f64,
    residual_bound: f64,
}

impl SyntheticConditional {
    /// `residual_bound` is in the units of the sampled values.
    pub fn new(s: f64, scale: f64, residual_bound: f64) -> Self {
        Self {
            s,
            scale,
            residual_bound,
        }
    }
}

impl ConditionalModel for SyntheticConditional {
    fn sample(&self, z: &[f64], rng: &mut dyn RngCore) -> f64 {
        let noise: f64 = rng.sample(StandardNormal);
        let r = (noise / self.scale).clamp(-self.residual_bound, self.residual_bound);
        self.mean(z) + r
    }

    fn mean(&self, z: &[f64]) -> f64 {
        f_s(z[0], self.s) / self.scale
    }

    fn residual_bound(&self) -> f64 {
        self.residual_bound
    }
}

/// Conditional model matching a dataset produced by [`generate`]. The
/// residual bound is the rescaling bound expressed on the rescaled scale.
pub fn make_conditional_model(gt: &GroundTruth) -> SyntheticConditional {
    SyntheticConditional::new(gt.s, gt.scale_x, gt.bound / gt.scale_x)
}

/// Empirical fit-quality terms on the rescaled scale:
/// `A = n⁻¹ Σ (truth − fit)²` and `B = n⁻¹ Σ (truth − fit)² · (conditional
/// variance of the other variable)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub a_f: f64,
    pub a_g: f64,
    pub b_f: f64,
    pub b_g: f64,
}

pub fn fit_diagnostics_from_predictions(
    f_hat: &[f64],
    g_hat: &[f64],
    gt: &GroundTruth,
    z: &RowMatrix,
) -> FitDiagnostics {
    let n = z.nrows() as f64;
    let (mut a_f, mut a_g) = (0.0, 0.0);
    for (i, zi) in z.rows_iter().enumerate() {
        a_f += (gt.f_rescaled(zi) - f_hat[i]).powi(2);
        a_g += (gt.g_rescaled(zi) - g_hat[i]).powi(2);
    }
    a_f /= n;
    a_g /= n;
    // Conditional variances are constant in z for this model.
    FitDiagnostics {
        a_f,
        a_g,
        b_f: a_f * gt.cond_var_y_rescaled(),
        b_g: a_g * gt.cond_var_x_rescaled(),
    }
}

pub fn fit_diagnostics(
    model_f: &Regressor,
    model_g: &Regressor,
    gt: &GroundTruth,
    z: &RowMatrix,
) -> Result<FitDiagnostics, TestError> {
    let f_hat = model_f.predict_many(z)?;
    let g_hat = model_g.predict_many(z)?;
    Ok(fit_diagnostics_from_predictions(&f_hat, &g_hat, gt, z))
}
