//! Differentially private conditional independence testing.
//!
//! The crate provides kernel ridge regression with explicit sensitivity
//! bounds, the generalised covariance measure and the conditional
//! randomization test together with private variants of both, a synthetic
//! benchmark model, and a Monte Carlo experiment harness.

pub mod crt;
pub mod dataset;
pub mod dp;
pub mod error;
pub mod gcm;
pub mod harness;
pub mod krr;
pub mod seed;
pub mod synth;

pub use crt::{crt_statistic, crt_test, priv_crt_test, ConditionalModel, CrtConfig, CrtResult};
pub use dataset::{BoundedDataset, Dataset, DatasetError, RowMatrix};
pub use dp::{DpError, PrivacyParams};
pub use error::TestError;
pub use gcm::{gcm_test, priv_gcm_test, GcmConfig, GcmResult};
pub use krr::{FitConfig, KernelConfig, KrrError, KrrModel};
pub use seed::{derive_seed, seeded_rng, SimRng};
pub use synth::{generate, GroundTruth, SynthParams};
