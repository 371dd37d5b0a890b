//! Inputs shared by the benchmarks.

use nalgebra::DMatrix;
use pvaug::resampling::rng;
use pvaug::DataMatrix;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut r))
}

/// Rank-`rank` matrix plus small noise, with a response driven by the scores.
pub fn collinear(rows: usize, cols: usize, rank: usize, seed: u64) -> (DataMatrix, Vec<f64>) {
    let scores = normal(rows, rank, seed);
    let x = &scores * normal(rank, cols, seed + 1) + normal(rows, cols, seed + 2) * 1e-3;
    let y = (&scores * normal(rank, 1, seed + 3)).iter().copied().collect();
    (DataMatrix::new(x).expect("finite"), y)
}
