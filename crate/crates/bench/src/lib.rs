//! Shared fixtures for the benchmarks.

use privci::dataset::BoundedDataset;
use privci::seed::seeded_rng;
use privci::synth::{generate, SynthParams};

/// A synthetic dataset of `n` rows with one covariate.
pub fn fixture(n: usize, beta: f64, seed: u64) -> BoundedDataset {
    generate(&SynthParams::new(n, 1, 2.0, beta), &mut seeded_rng(seed))
        .expect("valid parameters")
        .0
}
