//! Deterministic fixtures shared by the benchmarks.

use ndarray::Array2;
use stepseg::{DurationConfig, DurationLimit, Label, ModelParams};

/// Model with `steps` step states plus background, means spread apart on a
/// diagonal and durations capped at `max_duration`.
pub fn model(steps: usize, dim: usize, max_duration: usize) -> ModelParams {
    let mut labels: Vec<Label> = (0..steps).map(Label::Step).collect();
    labels.push(Label::Background);
    let n = labels.len();
    let mut params = ModelParams::uniform(labels, dim, 6.0);
    params.means = Array2::from_shape_fn((n, dim), |(i, j)| 2.0 * i as f64 + 0.1 * j as f64);
    params.with_durations(DurationConfig {
        limit: DurationLimit::Fixed(max_duration),
        ..DurationConfig::default()
    })
}

/// Features of length `t` sampled from `params`.
pub fn features(params: &ModelParams, t: usize, seed: u64) -> Array2<f64> {
    stepseg::model::sample(params, t, seed).1
}

/// Dense cost matrix with no structure that favours the identity.
pub fn cost_matrix(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| ((i * 7919 + j * 104_729) % 1009) as f64)
}
