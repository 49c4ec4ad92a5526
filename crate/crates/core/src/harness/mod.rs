//! Monte Carlo experiment harness: grids of synthetic cells, per-trial
//! seeded execution, rejection rates with Wilson intervals, distribution
//! checks, sensitivity audits and serialization.

use thiserror::Error;

use crate::error::TestError;

pub mod audit;
pub mod config;
pub mod output;
pub mod run;
pub mod stats;

pub use audit::{sensitivity_audit, AuditReport, AuditRow};
pub use config::{
    Cell, ExperimentConfig, FailurePolicy, Grid, HyperMode, OutputFormat, OutputSpec, TestKind,
};
pub use output::{write_results, write_results_to_path};
pub use run::{
    run_cell, run_experiment, run_trial, trial_seed, CellResult, TrialOutcome, TrialRecord,
    SCHEMA_VERSION,
};
pub use stats::{
    ks_normal, ks_statistic, ks_test, rejection_rate, uniformity_check, wilson_interval,
    KsResult, RateEstimate, UniformityCheck,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input")]
    EmptyInput,
    #[error("value {0} is not on the p-value lattice")]
    OffLatticeValue(f64),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("serialization error: {0}")]
    Serialize(String),
    #[error(transparent)]
    Test(#[from] TestError),
}
