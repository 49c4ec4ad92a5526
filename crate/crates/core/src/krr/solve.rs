//! Solves `(K + s I) X = B` for a symmetric positive semi-definite `K` and `s > 0`.

use nalgebra::{Cholesky, DMatrix};

use super::KrrError;

const JITTER: f64 = 1e-10;
const CG_TOLERANCE: f64 = 1e-12;
const CG_MAX_ITER: usize = 500;
/// Systems at or below this size always use the direct factorisation.
const DIRECT_MAX_N: usize = 400;

/// Linear solver used for the shifted Gram system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Cholesky for small systems, conjugate gradient above that, with
    /// Cholesky as a fallback if CG fails to converge.
    #[default]
    Auto,
    Cholesky,
    ConjugateGradient,
}

pub fn solve_shifted(
    k: &DMatrix<f64>,
    shift: f64,
    rhs: &DMatrix<f64>,
    solver: Solver,
) -> Result<DMatrix<f64>, KrrError> {
    if k.nrows() != k.ncols() || k.nrows() != rhs.nrows() {
        return Err(KrrError::DimensionMismatch {
            expected: k.nrows(),
            got: rhs.nrows(),
        });
    }
    match solver {
        Solver::Cholesky => cholesky(k, shift, rhs),
        Solver::ConjugateGradient => conjugate_gradient(k, shift, rhs).ok_or_else(|| {
            KrrError::SolveFailure("conjugate gradient did not converge".into())
        }),
        Solver::Auto if k.nrows() <= DIRECT_MAX_N => cholesky(k, shift, rhs),
        Solver::Auto => match conjugate_gradient(k, shift, rhs) {
            Some(x) => Ok(x),
            None => cholesky(k, shift, rhs),
        },
    }
}

fn cholesky(k: &DMatrix<f64>, shift: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, KrrError> {
    let n = k.nrows();
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let chol = match Cholesky::new(a.clone()) {
        Some(c) => c,
        None => {
            for i in 0..n {
                a[(i, i)] += JITTER;
            }
            Cholesky::new(a).ok_or_else(|| {
                KrrError::SolveFailure("matrix is not positive definite".into())
            })?
        }
    };
    let x = chol.solve(rhs);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(KrrError::SolveFailure("non-finite solution".into()))
    }
}

/// Block conjugate gradient with independent step sizes per column. Returns
/// `None` when some column misses the relative residual tolerance.
fn conjugate_gradient(k: &DMatrix<f64>, shift: f64, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (n, cols) = b.shape();
    let mut x = DMatrix::zeros(n, cols);
    let mut r = b.clone();
    let mut p = b.clone();
    let target: Vec<f64> = (0..cols)
        .map(|j| CG_TOLERANCE * b.column(j).norm())
        .collect();
    let mut rs: Vec<f64> = (0..cols).map(|j| r.column(j).norm_squared()).collect();
    let mut done: Vec<bool> = (0..cols).map(|j| rs[j].sqrt() <= target[j]).collect();

    for _ in 0..CG_MAX_ITER.min(n.max(1) * 2) {
        if done.iter().all(|&d| d) {
            return Some(x);
        }
        let mut ap = k * &p;
        ap += &p * shift;
        for j in 0..cols {
            if done[j] {
                continue;
            }
            let denom = p.column(j).dot(&ap.column(j));
            if !(denom > 0.0) {
                return None;
            }
            let step = rs[j] / denom;
            x.column_mut(j).axpy(step, &p.column(j), 1.0);
            r.column_mut(j).axpy(-step, &ap.column(j), 1.0);
            let rs_new = r.column(j).norm_squared();
            if rs_new.sqrt() <= target[j] {
                done[j] = true;
                p.column_mut(j).fill(0.0);
            } else {
                let beta = rs_new / rs[j];
                let rj = r.column(j).clone_owned();
                let mut pj = p.column_mut(j);
                pj *= beta;
                pj += rj;
            }
            rs[j] = rs_new;
        }
    }
    done.iter().all(|&d| d).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| (-(i as f64 - j as f64).powi(2) / 50.0).exp())
    }

    #[test]
    fn solvers_agree() {
        let k = spd(120);
        let b = DMatrix::from_fn(120, 2, |i, j| ((i * (j + 3)) as f64).sin());
        let direct = solve_shifted(&k, 3.0, &b, Solver::Cholesky).unwrap();
        let cg = solve_shifted(&k, 3.0, &b, Solver::ConjugateGradient).unwrap();
        assert!((&direct - &cg).amax() < 1e-10);
        let resid = &k * &cg + &cg * 3.0 - &b;
        assert!(resid.amax() < 1e-9);
    }

    #[test]
    fn zero_rhs_is_zero() {
        let k = spd(10);
        let b = DMatrix::zeros(10, 1);
        let x = solve_shifted(&k, 1.0, &b, Solver::ConjugateGradient).unwrap();
        assert_eq!(x.amax(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let k = spd(4);
        let b = DMatrix::zeros(3, 1);
        assert!(solve_shifted(&k, 1.0, &b, Solver::Auto).is_err());
    }
}
