use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RowMatrix;
use crate::error::TestError;
use crate::krr::{
    krr_fit, prediction_sensitivity, sensitivity_crt, sensitivity_gcm, KernelConfig, KrrModel,
};

/// Bandwidth used by the audit fits. The bounds hold for any fixed kernel.
pub const AUDIT_BANDWIDTH: f64 = 0.5;
const PROBE_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: usize,
    pub lambda: f64,
    pub pairs: usize,
    pub gcm_bound: f64,
    pub gcm_max: f64,
    pub gcm_violations: usize,
    pub crt_bound: f64,
    pub crt_max: f64,
    pub crt_violations: usize,
    pub prediction_bound: f64,
    pub prediction_max: f64,
    pub prediction_violations: usize,
}

impl AuditRow {
    pub fn violations(&self) -> usize {
        self.gcm_violations + self.crt_violations + self.prediction_violations
    }

    /// Largest observed-to-bound ratio over the three quantities.
    pub fn max_ratio(&self) -> f64 {
        (self.gcm_max / self.gcm_bound)
            .max(self.crt_max / self.crt_bound)
            .max(self.prediction_max / self.prediction_bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(AuditRow::violations).sum()
    }
}

struct Sample {
    z: Vec<f64>,
    x: f64,
    y: f64,
    /// Exact `X` residual for the CRT statistic.
    r: f64,
}

fn draw_value<R: Rng + ?Sized>(extreme: bool, rng: &mut R) -> f64 {
    if extreme {
        if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    } else {
        rng.random_range(-1.0..=1.0)
    }
}

fn draw_sample<R: Rng + ?Sized>(d: usize, extreme: bool, rng: &mut R) -> Sample {
    Sample {
        z: (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        x: draw_value(extreme, rng),
        y: draw_value(extreme, rng),
        r: draw_value(extreme, rng),
    }
}

struct Fitted {
    f: KrrModel,
    g: KrrModel,
    products: Vec<f64>,
    t: f64,
}

fn fit_all(rows: &[Sample], lambda: f64, kernel: &KernelConfig) -> Result<Fitted, TestError> {
    let d = rows[0].z.len();
    let z = RowMatrix::new(
        rows.len(),
        d,
        rows.iter().flat_map(|r| r.z.iter().copied()).collect(),
    )?;
    let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let f = krr_fit(&z, &x, lambda, kernel)?;
    let g = krr_fit(&z, &y, lambda, kernel)?;
    let fx = f.predict_many(&z)?;
    let gy = g.predict_many(&z)?;
    let mut products = Vec::with_capacity(rows.len());
    let mut t = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let ry = row.y - gy[i];
        products.push((row.x - fx[i]) * ry);
        t += row.r * ry;
    }
    Ok(Fitted { f, g, products, t })
}

/// Fits on random bounded datasets and on replace-one-row neighbours and
/// compares the observed changes with the analytic bounds. Half the pairs
/// use values at `±1` to push towards the worst case.
pub fn sensitivity_audit<R: Rng + ?Sized>(
    lambda: f64,
    n_list: &[usize],
    trials: usize,
    rng: &mut R,
) -> Result<AuditReport, TestError> {
    let kernel = KernelConfig::new(AUDIT_BANDWIDTH)?;
    let gcm_bound = sensitivity_gcm(lambda)?;
    let crt_bound = sensitivity_crt(lambda)?;
    let d = 1;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n < 1 {
            return Err(TestError::TooFewSamples { needed: 1, got: n });
        }
        let prediction_bound = prediction_sensitivity(lambda, n)?;
        let mut row = AuditRow {
            n,
            lambda,
            pairs: trials,
            gcm_bound,
            gcm_max: 0.0,
            gcm_violations: 0,
            crt_bound,
            crt_max: 0.0,
            crt_violations: 0,
            prediction_bound,
            prediction_max: 0.0,
            prediction_violations: 0,
        };
        for t in 0..trials {
            let extreme = t % 2 == 1;
            let data: Vec<Sample> = (0..n).map(|_| draw_sample(d, extreme, rng)).collect();
            let a = fit_all(&data, lambda, &kernel)?;
            let mut neighbour = data;
            let k = rng.random_range(0..n);
            neighbour[k] = draw_sample(d, extreme, rng);
            let b = fit_all(&neighbour, lambda, &kernel)?;

            let l1: f64 = a.products.iter().zip(&b.products).map(|(p, q)| (p - q).abs()).sum();
            let dt = (a.t - b.t).abs();
            let mut dp: f64 = 0.0;
            for _ in 0..PROBE_POINTS {
                let probe: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..=1.5)).collect();
                dp = dp.max((a.f.predict(&probe)? - b.f.predict(&probe)?).abs());
                dp = dp.max((a.g.predict(&probe)? - b.g.predict(&probe)?).abs());
            }
            row.gcm_max = row.gcm_max.max(l1);
            row.crt_max = row.crt_max.max(dt);
            row.prediction_max = row.prediction_max.max(dp);
            row.gcm_violations += usize::from(l1 > gcm_bound);
            row.crt_violations += usize::from(dt > crt_bound);
            row.prediction_violations += usize::from(dp > prediction_bound);
        }
        rows.push(row);
    }
    Ok(AuditReport { rows })
}
