use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig, FailurePolicy, HyperMode, TestKind};
use super::stats::{mean_variance, rate_from_counts};
use super::HarnessError;
use crate::crt::{crt_test, exact_rank, priv_crt_test, rank_p_value, CrtConfig};
use crate::error::TestError;
use crate::gcm::{gcm_test, priv_gcm_test, GcmConfig};
use crate::krr::FitConfig;
use crate::seed::{derive_seed, key_hash, seeded_rng};
use crate::synth::{generate, make_conditional_model, SynthParams};

/// Outcome of one successful trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub p_value: f64,
    /// Normalised statistic for GCM tests, `T_0` for CRT tests.
    pub statistic: f64,
    /// Exact-rank p-value `p*`, available for CRT tests.
    pub exact_p_value: Option<f64>,
    /// `T_0..T_m` for CRT tests.
    pub crt_statistics: Option<Vec<f64>>,
    /// Number of residual products (GCM) or rows (CRT).
    pub n_effective: usize,
    pub clipped: usize,
}

/// A trial is either a record or a tagged failure; none are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Ok(TrialRecord),
    Failed(String),
}

impl TrialOutcome {
    pub fn record(&self) -> Option<&TrialRecord> {
        match self {
            Self::Ok(r) => Some(r),
            Self::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub schema_version: u32,
    pub test: TestKind,
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub beta: f64,
    pub epsilon: Option<f64>,
    pub m: Option<usize>,
    pub alpha: f64,
    pub lambda_floor: f64,
    pub split_mode: bool,
    pub trials: usize,
    pub failures: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_statistic: Option<f64>,
    pub var_statistic: Option<f64>,
    pub p_values: Option<Vec<f64>>,
}

pub const SCHEMA_VERSION: u32 = 1;

pub fn trial_seed(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[key_hash(&cell.key(cfg.test)), trial as u64])
}

fn fit_config(cfg: &ExperimentConfig) -> FitConfig {
    match cfg.hyper {
        HyperMode::CrossValidated => FitConfig::cross_validated(cfg.lambda_floor),
        HyperMode::Fixed => FitConfig::fixed(cfg.lambda_floor),
    }
}

/// Generates one synthetic dataset and runs the configured test on it.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> Result<TrialRecord, TestError> {
    let mut rng = seeded_rng(seed);
    let params = SynthParams {
        bound_c: cfg.bound_c,
        ..SynthParams::new(cell.n, cell.d, cell.s, cell.beta)
    };
    let (ds, gt) = generate(&params, &mut rng)?;
    let fit = fit_config(cfg);
    let clipped = ds.clipped();
    let missing = |what: &str| TestError::InvalidParameter(format!("cell has no {what}"));
    match cfg.test {
        TestKind::Gcm | TestKind::PrivGcm => {
            let gcfg = GcmConfig::new(fit).split(cfg.split_mode);
            let r = if cfg.test == TestKind::Gcm {
                gcm_test(&ds, &gcfg, &mut rng)?
            } else {
                let eps = cell.epsilon.ok_or_else(|| missing("epsilon"))?;
                priv_gcm_test(&ds, eps, &gcfg, &mut rng)?
            };
            Ok(TrialRecord {
                p_value: r.p_value,
                statistic: r.statistic,
                exact_p_value: None,
                crt_statistics: None,
                n_effective: r.n,
                clipped,
            })
        }
        TestKind::Crt | TestKind::PrivCrt => {
            let m = cell.m.ok_or_else(|| missing("m"))?;
            let cond = make_conditional_model(&gt);
            let ccfg = CrtConfig::new(fit).retain_statistics(true);
            let r = if cfg.test == TestKind::Crt {
                crt_test(&ds, &cond, m, &ccfg, &mut rng)?
            } else {
                let eps = cell.epsilon.ok_or_else(|| missing("epsilon"))?;
                priv_crt_test(&ds, &cond, m, eps, &ccfg, &mut rng)?
            };
            let stats = r.statistics.expect("statistics retained");
            Ok(TrialRecord {
                p_value: r.p_value,
                statistic: stats[0],
                exact_p_value: Some(rank_p_value(exact_rank(&stats), m)),
                crt_statistics: Some(stats),
                n_effective: ds.len(),
                clipped,
            })
        }
    }
}

/// Runs every trial of one cell. Trials may execute in parallel; each uses
/// its own derived seed and results are kept in trial order.
pub fn run_cell_trials(cfg: &ExperimentConfig, cell: &Cell) -> Vec<TrialOutcome> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| match run_trial(cfg, cell, trial_seed(cfg, cell, t)) {
            Ok(r) => TrialOutcome::Ok(r),
            Err(e) => TrialOutcome::Failed(e.to_string()),
        })
        .collect()
}

pub fn summarize(cfg: &ExperimentConfig, cell: &Cell, outcomes: &[TrialOutcome]) -> CellResult {
    let records: Vec<&TrialRecord> = outcomes.iter().filter_map(TrialOutcome::record).collect();
    let failures = outcomes.len() - records.len();
    let rejections = records.iter().filter(|r| r.p_value <= cfg.alpha).count();
    let denominator = match cfg.failure_policy {
        FailurePolicy::CountAsNonRejection => outcomes.len(),
        FailurePolicy::Exclude => records.len(),
    };
    let rate = rate_from_counts(rejections, denominator);
    let stats: Vec<f64> = records.iter().map(|r| r.statistic).collect();
    let mv = mean_variance(&stats);
    CellResult {
        schema_version: SCHEMA_VERSION,
        test: cfg.test,
        n: cell.n,
        d: cell.d,
        s: cell.s,
        beta: cell.beta,
        epsilon: cell.epsilon,
        m: cell.m,
        alpha: cfg.alpha,
        lambda_floor: cfg.lambda_floor,
        split_mode: cfg.split_mode,
        trials: outcomes.len(),
        failures,
        rejections,
        rejection_rate: rate.rate,
        ci_low: rate.ci_low,
        ci_high: rate.ci_high,
        mean_statistic: mv.map(|v| v.0),
        var_statistic: mv.map(|v| v.1),
        p_values: cfg
            .retain_p_values
            .then(|| records.iter().map(|r| r.p_value).collect()),
    }
}

/// Runs one cell and returns both the summary and the per-trial outcomes.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> (CellResult, Vec<TrialOutcome>) {
    let outcomes = run_cell_trials(cfg, cell);
    (summarize(cfg, cell, &outcomes), outcomes)
}

/// Runs every grid cell and, when an output is configured, writes the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellResult>, HarnessError> {
    cfg.validate()?;
    let results: Vec<CellResult> = cfg.cells().iter().map(|c| run_cell(cfg, c).0).collect();
    if let Some(out) = &cfg.output {
        super::output::write_results_to_path(&results, out)?;
    }
    Ok(results)
}
