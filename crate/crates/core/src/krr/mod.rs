//! Gaussian-kernel ridge regression with bounded residual sensitivity.
//!
//! The model minimises `(λ/2)‖w‖² + (1/n) Σ (u_i − wᵀφ(v_i))²` over the RKHS of a
//! Gaussian kernel. Stationarity gives `w = Σ α_i φ(v_i)` with
//! `(K + (nλ/2) I) α = u`, which is what [`krr_fit`] solves. Because
//! `k(v, v) = 1`, targets bounded by 1 give `‖w‖ ≤ sqrt(2/λ)`, and the residual
//! products used by the tests downstream have sensitivity bounded by the
//! constants in [`sensitivity`].

mod cv;
mod fit;
mod sensitivity;
mod solve;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataset::RowMatrix;

pub use cv::{
    cv_select, cv_select_many, default_bandwidth_grid, default_lambda_grid, fold_assignment,
    median_pairwise_distance, CvGrid, CvSelection,
};
pub use fit::{fit_targets, FitConfig, FittedTarget, Hyper, Regressor};
pub use sensitivity::{
    prediction_sensitivity, sensitivity_crt, sensitivity_gcm, SensitivityConstants,
};
pub use solve::{solve_shifted, Solver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target {0} has magnitude above 1")]
    BoundViolation(usize),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("regularisation must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("hyper-parameter grid is empty")]
    EmptyGrid,
    #[error("lambda {lambda} is below the floor {floor}")]
    LambdaBelowFloor { lambda: f64, floor: f64 },
    #[error("cannot build {folds} folds from {n} samples")]
    InvalidFolds { folds: usize, n: usize },
    #[error("need at least one training sample")]
    NoSamples,
}

/// Gaussian kernel `exp(−‖v − v'‖² / (2 h²))` with length-scale `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self, KrrError> {
        if bandwidth > 0.0 && bandwidth.is_finite() {
            Ok(Self { bandwidth })
        } else {
            Err(KrrError::InvalidBandwidth(bandwidth))
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    fn gamma(&self) -> f64 {
        -0.5 / (self.bandwidth * self.bandwidth)
    }

    #[inline]
    fn eval_sq_dist(&self, d2: f64) -> f64 {
        (self.gamma() * d2).exp()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub fn gaussian_kernel(v: &[f64], w: &[f64], cfg: &KernelConfig) -> Result<f64, KrrError> {
    if v.len() != w.len() {
        return Err(KrrError::DimensionMismatch {
            expected: v.len(),
            got: w.len(),
        });
    }
    Ok(cfg.eval_sq_dist(sq_dist(v, w)))
}

/// Symmetric matrix of pairwise squared distances between rows of `z`.
pub(crate) fn sq_dist_matrix(z: &RowMatrix) -> DMatrix<f64> {
    let n = z.nrows();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let zj = z.row(j);
        for i in j + 1..n {
            d[(i, j)] = sq_dist(z.row(i), zj);
        }
    }
    d.fill_upper_triangle_with_lower_triangle();
    d
}

/// Gram matrix `K_ij = k(z_i, z_j)`.
pub fn gram_matrix(z: &RowMatrix, cfg: &KernelConfig) -> DMatrix<f64> {
    let n = z.nrows();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let zj = z.row(j);
        k[(j, j)] = 1.0;
        for i in j + 1..n {
            k[(i, j)] = cfg.eval_sq_dist(sq_dist(z.row(i), zj));
        }
    }
    k.fill_upper_triangle_with_lower_triangle();
    k
}

/// Rectangular kernel matrix with rows indexed by `a` and columns by `b`.
pub fn cross_gram(a: &RowMatrix, b: &RowMatrix, cfg: &KernelConfig) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        cfg.eval_sq_dist(sq_dist(a.row(i), b.row(j)))
    })
}

/// A fitted kernel ridge regressor in dual form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    dual_weights: Vec<f64>,
    train_z: RowMatrix,
    kernel: KernelConfig,
    lambda: f64,
}

impl KrrModel {
    pub fn dual_weights(&self) -> &[f64] {
        &self.dual_weights
    }

    pub fn train_z(&self) -> &RowMatrix {
        &self.train_z
    }

    pub fn kernel(&self) -> KernelConfig {
        self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// A model predicting zero everywhere, anchored at `train_z`.
    pub fn zero(train_z: RowMatrix, kernel: KernelConfig, lambda: f64) -> Self {
        Self {
            dual_weights: vec![0.0; train_z.nrows()],
            train_z,
            kernel,
            lambda,
        }
    }

    /// RKHS norm of the primal weight, `sqrt(αᵀKα)`.
    pub fn rkhs_norm(&self) -> f64 {
        let k = gram_matrix(&self.train_z, &self.kernel);
        let a = DVector::from_column_slice(&self.dual_weights);
        a.dot(&(&k * &a)).max(0.0).sqrt()
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64, KrrError> {
        krr_predict(self, z)
    }

    pub fn predict_many(&self, z: &RowMatrix) -> Result<Vec<f64>, KrrError> {
        self.check_dim(z.ncols())?;
        Ok(z.rows_iter().map(|q| self.predict_unchecked(q)).collect())
    }

    fn check_dim(&self, d: usize) -> Result<(), KrrError> {
        if d != self.train_z.ncols() {
            return Err(KrrError::DimensionMismatch {
                expected: self.train_z.ncols(),
                got: d,
            });
        }
        Ok(())
    }

    #[inline]
    fn predict_unchecked(&self, q: &[f64]) -> f64 {
        self.train_z
            .rows_iter()
            .zip(&self.dual_weights)
            .map(|(zi, a)| a * self.kernel.eval_sq_dist(sq_dist(zi, q)))
            .sum()
    }
}

fn validate_fit_inputs(z: &RowMatrix, u: &[f64], lambda: f64) -> Result<(), KrrError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(KrrError::NonPositiveLambda(lambda));
    }
    if z.nrows() == 0 {
        return Err(KrrError::NoSamples);
    }
    if u.len() != z.nrows() {
        return Err(KrrError::DimensionMismatch {
            expected: z.nrows(),
            got: u.len(),
        });
    }
    if let Some(i) = u.iter().position(|v| !(v.abs() <= 1.0)) {
        return Err(KrrError::BoundViolation(i));
    }
    Ok(())
}

/// Fits one regressor per target against a shared Gram matrix. Returns the
/// models together with their in-sample predictions `Kα`.
pub(crate) fn fit_with_gram(
    z: &RowMatrix,
    k: &DMatrix<f64>,
    targets: &[&[f64]],
    lambda: f64,
    kernel: KernelConfig,
    solver: Solver,
) -> Result<Vec<(KrrModel, Vec<f64>)>, KrrError> {
    for u in targets {
        validate_fit_inputs(z, u, lambda)?;
    }
    let n = z.nrows();
    let rhs = DMatrix::from_fn(n, targets.len(), |i, j| targets[j][i]);
    let alpha = solve_shifted(k, 0.5 * n as f64 * lambda, &rhs, solver)?;
    let fitted = k * &alpha;
    Ok((0..targets.len())
        .map(|j| {
            let model = KrrModel {
                dual_weights: alpha.column(j).iter().copied().collect(),
                train_z: z.clone(),
                kernel,
                lambda,
            };
            (model, fitted.column(j).iter().copied().collect())
        })
        .collect())
}

/// Fits `u ≈ wᵀφ(z)` with regularisation `λ`, using the default solver.
pub fn krr_fit(
    z: &RowMatrix,
    u: &[f64],
    lambda: f64,
    cfg: &KernelConfig,
) -> Result<KrrModel, KrrError> {
    krr_fit_with(z, u, lambda, cfg, Solver::Auto)
}

pub fn krr_fit_with(
    z: &RowMatrix,
    u: &[f64],
    lambda: f64,
    cfg: &KernelConfig,
    solver: Solver,
) -> Result<KrrModel, KrrError> {
    validate_fit_inputs(z, u, lambda)?;
    let k = gram_matrix(z, cfg);
    let mut fits = fit_with_gram(z, &k, &[u], lambda, *cfg, solver)?;
    Ok(fits.remove(0).0)
}

/// Evaluates `Σ_i α_i k(z_i, z)`.
pub fn krr_predict(model: &KrrModel, z: &[f64]) -> Result<f64, KrrError> {
    model.check_dim(z.len())?;
    Ok(model.predict_unchecked(z))
}

/// `u_i − f̂(z_i)` for every row.
pub fn residuals(model: &KrrModel, z: &RowMatrix, u: &[f64]) -> Result<Vec<f64>, KrrError> {
    if u.len() != z.nrows() {
        return Err(KrrError::DimensionMismatch {
            expected: z.nrows(),
            got: u.len(),
        });
    }
    let pred = model.predict_many(z)?;
    Ok(u.iter().zip(pred).map(|(a, p)| a - p).collect())
}
