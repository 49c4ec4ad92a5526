//! K-fold cross-validated grid search over `(λ, bandwidth)`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{sq_dist, sq_dist_matrix, solve_shifted, KernelConfig, KrrError, Solver};
use crate::dataset::RowMatrix;

/// Rows used when estimating the median pairwise distance.
const MEDIAN_SUBSAMPLE: usize = 1000;

/// Multipliers applied to the median pairwise distance.
pub const BANDWIDTH_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Multipliers applied to the λ floor.
pub const LAMBDA_MULTIPLIERS: [f64; 5] = [1.0, 3.0, 10.0, 30.0, 100.0];

/// Explicit hyper-parameter grid. An empty `bandwidths` list means "use
/// [`default_bandwidth_grid`] of the training covariates".
#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub lambdas: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub folds: usize,
}

impl CvGrid {
    pub fn with_floor(floor: f64) -> Self {
        Self {
            lambdas: default_lambda_grid(floor),
            bandwidths: Vec::new(),
            folds: 5,
        }
    }
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub lambda: f64,
    pub kernel: KernelConfig,
    /// Mean held-out squared error of the selected pair.
    pub error: f64,
    /// `(λ, bandwidth, error)` for every grid point, in evaluation order.
    pub table: Vec<(f64, f64, f64)>,
}

pub fn default_lambda_grid(floor: f64) -> Vec<f64> {
    LAMBDA_MULTIPLIERS.iter().map(|m| m * floor).collect()
}

pub fn default_bandwidth_grid(z: &RowMatrix) -> Vec<f64> {
    let med = median_pairwise_distance(z);
    BANDWIDTH_MULTIPLIERS.iter().map(|m| m * med).collect()
}

/// Median Euclidean distance between distinct rows, computed on an evenly
/// strided subsample of at most 1000 rows. Falls back to 1 when all rows
/// coincide.
pub fn median_pairwise_distance(z: &RowMatrix) -> f64 {
    let n = z.nrows();
    let stride = n.div_ceil(MEDIAN_SUBSAMPLE).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(sq_dist(z.row(i), z.row(j)));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let med = m.sqrt();
    if med > 0.0 && med.is_finite() {
        med
    } else {
        1.0
    }
}

/// Shuffles `0..n` and cuts the permutation into `folds` contiguous blocks.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    (0..folds)
        .map(|f| perm[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

fn validate_grid(lambdas: &[f64], bandwidths: &[f64], floor: f64) -> Result<(), KrrError> {
    if lambdas.is_empty() {
        return Err(KrrError::EmptyGrid);
    }
    for &lambda in lambdas {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(KrrError::NonPositiveLambda(lambda));
        }
        if lambda < floor {
            return Err(KrrError::LambdaBelowFloor { lambda, floor });
        }
    }
    for &h in bandwidths {
        KernelConfig::new(h)?;
    }
    Ok(())
}

/// Selects the `(λ, bandwidth)` pair with the smallest mean held-out squared
/// error. Ties keep the first pair in grid order (bandwidth outer, λ inner).
#[allow(clippy::too_many_arguments)]
pub fn cv_select<R: Rng + ?Sized>(
    z: &RowMatrix,
    u: &[f64],
    lambda_grid: &[f64],
    bandwidth_grid: &[f64],
    folds: usize,
    lambda_floor: f64,
    rng: &mut R,
) -> Result<CvSelection, KrrError> {
    let grid = CvGrid {
        lambdas: lambda_grid.to_vec(),
        bandwidths: bandwidth_grid.to_vec(),
        folds,
    };
    if bandwidth_grid.is_empty() {
        return Err(KrrError::EmptyGrid);
    }
    let mut out = cv_select_many(z, &[u], &grid, lambda_floor, Solver::Auto, rng)?;
    Ok(out.remove(0))
}

/// Grid search for several targets sharing the same covariates. The folds
/// and Gram matrices are shared; each target gets its own selection.
pub fn cv_select_many<R: Rng + ?Sized>(
    z: &RowMatrix,
    targets: &[&[f64]],
    grid: &CvGrid,
    lambda_floor: f64,
    solver: Solver,
    rng: &mut R,
) -> Result<Vec<CvSelection>, KrrError> {
    let n = z.nrows();
    let bandwidths = if grid.bandwidths.is_empty() {
        default_bandwidth_grid(z)
    } else {
        grid.bandwidths.clone()
    };
    validate_grid(&grid.lambdas, &bandwidths, lambda_floor)?;
    if grid.folds < 2 || grid.folds > n {
        return Err(KrrError::InvalidFolds {
            folds: grid.folds,
            n,
        });
    }
    for u in targets {
        if u.len() != n {
            return Err(KrrError::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        if let Some(i) = u.iter().position(|v| !(v.abs() <= 1.0)) {
            return Err(KrrError::BoundViolation(i));
        }
    }

    let folds = fold_assignment(n, grid.folds, rng);
    let train_idx: Vec<Vec<usize>> = folds
        .iter()
        .enumerate()
        .map(|(f, _)| {
            let mut t: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            t.sort_unstable();
            t
        })
        .collect();

    let d2 = sq_dist_matrix(z);
    let t = targets.len();
    // errors[target][grid point]
    let mut errors = vec![vec![0.0; bandwidths.len() * grid.lambdas.len()]; t];
    let mut table_keys = Vec::with_capacity(bandwidths.len() * grid.lambdas.len());
    for &h in &bandwidths {
        for &lambda in &grid.lambdas {
            table_keys.push((lambda, h));
        }
    }

    for (b, &h) in bandwidths.iter().enumerate() {
        let gamma = -0.5 / (h * h);
        let k = d2.map(|v| (gamma * v).exp());
        for (val, train) in folds.iter().zip(&train_idx) {
            if val.is_empty() {
                continue;
            }
            let k_tr = k.select_rows(train).select_columns(train);
            let k_val = k.select_rows(val).select_columns(train);
            let rhs = DMatrix::from_fn(train.len(), t, |i, j| targets[j][train[i]]);
            for (l, &lambda) in grid.lambdas.iter().enumerate() {
                let shift = 0.5 * train.len() as f64 * lambda;
                let alpha = solve_shifted(&k_tr, shift, &rhs, solver)?;
                let pred = &k_val * &alpha;
                for j in 0..t {
                    let sse: f64 = val
                        .iter()
                        .enumerate()
                        .map(|(r, &i)| (targets[j][i] - pred[(r, j)]).powi(2))
                        .sum();
                    errors[j][b * grid.lambdas.len() + l] += sse;
                }
            }
        }
    }

    Ok(errors
        .into_iter()
        .map(|errs| {
            let errs: Vec<f64> = errs.into_iter().map(|e| e / n as f64).collect();
            let mut best = 0;
            for (i, e) in errs.iter().enumerate() {
                if *e < errs[best] {
                    best = i;
                }
            }
            let (lambda, h) = table_keys[best];
            CvSelection {
                lambda,
                kernel: KernelConfig { bandwidth: h },
                error: errs[best],
                table: table_keys
                    .iter()
                    .zip(&errs)
                    .map(|(&(l, h), &e)| (l, h, e))
                    .collect(),
            }
        })
        .collect())
}
