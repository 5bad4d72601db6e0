//! Fixtures shared by the Criterion benchmarks under `benches/`.

use stablasso_core::data::{standardize, Dataset, SeedSpec};
use stablasso_core::scenarios::{generate, ScenarioSpec};

/// Standardized replicate of the `main`-structured design at `n x p`.
pub fn fixture(n: usize, p: usize, seed: u64) -> Dataset {
    let spec = ScenarioSpec::five_groups(
        "bench",
        n,
        p,
        [0.8, 0.85, 0.9, 0.95, 0.99],
        SeedSpec::new(seed, 0),
    );
    let sim = generate(&spec).expect("valid preset");
    standardize(&sim.raw_x, &sim.raw_y).expect("non-constant columns")
}
