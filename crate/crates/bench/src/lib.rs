//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use splitflow::{make_model, ModelPreset, Partition, Potential, Vector};

pub fn preset(name: &str) -> ModelPreset {
    make_model(name, &serde_json::Value::Null).expect("packaged model")
}

pub fn uniform(preset: &ModelPreset, steps: usize) -> Partition {
    Partition::uniform(preset.horizon, steps).expect("positive horizon")
}

/// Inf-convolution of a `p`-power norm and a tridiagonal quadratic on `n` nodes.
pub fn mixed_inf_convolution(n: usize, p: f64) -> Potential {
    let k = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    });
    Potential::inf_convolution(
        Potential::power_norm(p, Vector::from_element(n, 1.0)).expect("weights"),
        Potential::quadratic(k).expect("spd"),
    )
    .expect("same dimension")
}

pub fn wave(n: usize) -> Vector {
    Vector::from_fn(n, |i, _| ((i + 1) as f64).sin())
}
