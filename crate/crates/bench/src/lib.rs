//! Fixed inputs shared by the benchmarks.

use scosep::distributions::{make_dataset, DistSpec, Sample};

/// `n` samples from `spec` with a fixed seed.
pub fn samples(spec: &DistSpec, n: usize) -> Vec<Sample> {
    make_dataset(spec, n, 7).expect("benchmark dataset").samples
}

/// A deterministic point in `[-1, 1]^dim`.
pub fn point(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect()
}
