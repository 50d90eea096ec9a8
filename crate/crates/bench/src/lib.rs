//! Fixtures shared by the criterion benches.

use anyload_core::harness::{generate_instance, ExperimentConfig};
use anyload_core::SystemInstance;

/// Synthetic instance drawn with the sweep's default generator.
pub fn fixture(n: usize, abar: f64, seed: u64) -> SystemInstance {
    let config = ExperimentConfig {
        n,
        ..ExperimentConfig::default()
    };
    generate_instance(&config, abar, seed).expect("default generator yields valid instances")
}

/// Deterministic multiplier vector in [0.5, 2] so that β is of order one.
pub fn multipliers(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 + 1.5 * (i as f64 + 0.5) / n as f64).collect()
}
