//! Shared fixtures for the benchmarks in `benches/`.

use catsgrid::optimizer::{vns_optimize, OptimizerConfig};
use catsgrid::synthbench::{generate, PatternSpec, TimeType};
use catsgrid::{CatsDataset, GridModel};

/// A two-pattern dataset with ten sequences per pattern.
pub fn two_pattern(n_points: usize, eta: f64, seed: u64) -> CatsDataset {
    generate(&PatternSpec::two_patterns(), 10, n_points, eta, seed, TimeType::Real)
        .and_then(|s| s.dataset())
        .expect("built-in pattern spec is valid")
}

/// The dataset with a one-round fit of it.
pub fn fitted(n_points: usize, eta: f64, seed: u64) -> (CatsDataset, GridModel) {
    let d = two_pattern(n_points, eta, seed);
    let (m, _) = vns_optimize(&d, &OptimizerConfig { vns_rounds: 1, ..OptimizerConfig::with_seed(seed) });
    (d, m)
}
