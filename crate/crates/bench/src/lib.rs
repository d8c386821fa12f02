//! Shared fixtures for the benchmarks.

use tubetrace::synth::{generate, SynthSpec};
use tubetrace::{LabelVolume, Seed, Volume3D};

/// A single branching tree in a cube of side `n`.
pub fn tree_scene(n: usize, rng_seed: u64) -> (Volume3D, LabelVolume, Vec<Seed>) {
    let spec = SynthSpec {
        shape: [n, n, n],
        bifurcations: Some((1, 3)),
        rng_seed,
        ..SynthSpec::default()
    };
    generate(&spec).expect("bench spec is valid")
}

/// Deterministic integer cost matrix.
pub fn cost_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| ((i * 7919 + j * 104_729) % 101) as f64).collect())
        .collect()
}
