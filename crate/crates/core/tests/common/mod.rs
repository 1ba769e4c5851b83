#![allow(dead_code)]

use std::sync::OnceLock;

use efimov_core::potential::PotentialModel;
use efimov_core::two_body::{default_radial_grid, tune_resonance, TwoBodySolution, DEFAULT_RADIAL_NODES};

/// Default exponential potential tuned once per test binary.
pub fn solution() -> &'static TwoBodySolution {
    static SOLUTION: OnceLock<TwoBodySolution> = OnceLock::new();
    SOLUTION.get_or_init(|| {
        let pot = PotentialModel::default();
        let grid = default_radial_grid(&pot, DEFAULT_RADIAL_NODES).unwrap();
        tune_resonance(&pot, &grid, None).unwrap()
    })
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
