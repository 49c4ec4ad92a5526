//! The fitting procedure shared by the GCM and CRT pipelines.

use rand::Rng;

use super::{
    cv_select_many, fit_with_gram, gram_matrix, median_pairwise_distance, CvGrid, KernelConfig,
    KrrError, KrrModel, Solver,
};
use crate::dataset::RowMatrix;

/// How regression hyper-parameters are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Hyper {
    /// K-fold grid search, run separately for each regression target.
    CrossValidated(CvGrid),
    /// A fixed λ; `None` bandwidth means the median pairwise distance of the
    /// training covariates.
    Fixed { lambda: f64, bandwidth: Option<f64> },
    /// Predict zero everywhere. Residuals are then the raw targets.
    Zero,
}

/// Fitting configuration. `lambda_floor` is the public lower bound on λ at
/// which every sensitivity constant is evaluated, whatever λ the fit uses.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub lambda_floor: f64,
    pub hyper: Hyper,
    pub solver: Solver,
}

impl FitConfig {
    /// Five-fold CV over the default grids.
    pub fn cross_validated(lambda_floor: f64) -> Self {
        Self {
            lambda_floor,
            hyper: Hyper::CrossValidated(CvGrid::with_floor(lambda_floor)),
            solver: Solver::Auto,
        }
    }

    /// λ pinned to the floor and the median-distance bandwidth.
    pub fn fixed(lambda_floor: f64) -> Self {
        Self {
            lambda_floor,
            hyper: Hyper::Fixed {
                lambda: lambda_floor,
                bandwidth: None,
            },
            solver: Solver::Auto,
        }
    }

    pub fn zero(lambda_floor: f64) -> Self {
        Self {
            lambda_floor,
            hyper: Hyper::Zero,
            solver: Solver::Auto,
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::cross_validated(10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Krr(KrrModel),
    Zero,
}

impl Regressor {
    pub fn predict(&self, z: &[f64]) -> Result<f64, KrrError> {
        match self {
            Regressor::Krr(m) => m.predict(z),
            Regressor::Zero => Ok(0.0),
        }
    }

    pub fn predict_many(&self, z: &RowMatrix) -> Result<Vec<f64>, KrrError> {
        match self {
            Regressor::Krr(m) => m.predict_many(z),
            Regressor::Zero => Ok(vec![0.0; z.nrows()]),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Regressor::Krr(m) => Some(m.lambda()),
            Regressor::Zero => None,
        }
    }

    pub fn as_krr(&self) -> Option<&KrrModel> {
        match self {
            Regressor::Krr(m) => Some(m),
            Regressor::Zero => None,
        }
    }
}

/// A fitted regressor and its predictions on the training rows.
#[derive(Debug, Clone)]
pub struct FittedTarget {
    pub regressor: Regressor,
    pub fitted: Vec<f64>,
}

/// Fits one regressor per target on covariates `z`. Targets that end up with
/// identical hyper-parameters share a single Gram matrix and block solve.
pub fn fit_targets<R: Rng + ?Sized>(
    z: &RowMatrix,
    targets: &[&[f64]],
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<Vec<FittedTarget>, KrrError> {
    if !(cfg.lambda_floor > 0.0 && cfg.lambda_floor.is_finite()) {
        return Err(KrrError::NonPositiveLambda(cfg.lambda_floor));
    }
    let params: Vec<(f64, f64)> = match &cfg.hyper {
        Hyper::Zero => {
            return Ok(targets
                .iter()
                .map(|_| FittedTarget {
                    regressor: Regressor::Zero,
                    fitted: vec![0.0; z.nrows()],
                })
                .collect())
        }
        Hyper::Fixed { lambda, bandwidth } => {
            if *lambda < cfg.lambda_floor {
                return Err(KrrError::LambdaBelowFloor {
                    lambda: *lambda,
                    floor: cfg.lambda_floor,
                });
            }
            let h = bandwidth.unwrap_or_else(|| median_pairwise_distance(z));
            vec![(*lambda, h); targets.len()]
        }
        Hyper::CrossValidated(grid) => {
            cv_select_many(z, targets, grid, cfg.lambda_floor, cfg.solver, rng)?
                .into_iter()
                .map(|s| (s.lambda, s.kernel.bandwidth()))
                .collect()
        }
    };

    let mut out: Vec<Option<FittedTarget>> = vec![None; targets.len()];
    for first in 0..targets.len() {
        if out[first].is_some() {
            continue;
        }
        let (lambda, h) = params[first];
        let group: Vec<usize> = (first..targets.len())
            .filter(|&j| out[j].is_none() && params[j] == (lambda, h))
            .collect();
        let kernel = KernelConfig::new(h)?;
        let k = gram_matrix(z, &kernel);
        let group_targets: Vec<&[f64]> = group.iter().map(|&j| targets[j]).collect();
        let fits = fit_with_gram(z, &k, &group_targets, lambda, kernel, cfg.solver)?;
        for (&j, (model, fitted)) in group.iter().zip(fits) {
            out[j] = Some(FittedTarget {
                regressor: Regressor::Krr(model),
                fitted,
            });
        }
    }
    Ok(out.into_iter().map(|f| f.expect("every target fitted")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_below_floor_is_rejected() {
        let z = RowMatrix::column(vec![0.0, 1.0, 2.0]);
        let cfg = FitConfig {
            lambda_floor: 10.0,
            hyper: Hyper::Fixed {
                lambda: 1.0,
                bandwidth: None,
            },
            solver: Solver::Auto,
        };
        let err = fit_targets(&z, &[&[0.0; 3]], &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, KrrError::LambdaBelowFloor { .. }));
    }

    #[test]
    fn shared_gram_matches_separate_fits() {
        let z = RowMatrix::column((0..50).map(|i| (i as f64 * 0.37).sin() * 2.0).collect());
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos() * 0.9).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.23).sin() * 0.5).collect();
        let cfg = FitConfig::fixed(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let both = fit_targets(&z, &[&a, &b], &cfg, &mut rng).unwrap();
        let only_b = fit_targets(&z, &[&b], &cfg, &mut rng).unwrap();
        for (p, q) in both[1].fitted.iter().zip(&only_b[0].fitted) {
            assert!((p - q).abs() < 1e-13);
        }
        assert_eq!(both[0].regressor.lambda(), Some(10.0));
    }

    #[test]
    fn zero_fit() {
        let z = RowMatrix::column(vec![0.0, 1.0]);
        let fits = fit_targets(&z, &[&[0.5, -0.5]], &FitConfig::zero(10.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(fits[0].fitted, vec![0.0, 0.0]);
        assert_eq!(fits[0].regressor.predict(&[3.0]).unwrap(), 0.0);
    }
}
