//! Seeded assignment of rows to cross-validation segments.
//!
//! All randomness in the crate comes from [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`; both are specified bit-for-bit, so a plan
//! depends only on `(rows, segments, seed, scheme)`.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Project-wide generator.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` child seeds drawn from a generator seeded with `seed`.
pub fn derive_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.next_u64()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Seeded shuffle followed by contiguous blocks.
    #[default]
    Random,
    /// Row `i` goes to segment `i mod K`; ignores the seed.
    Venetian,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Random => f.write_str("random"),
            Scheme::Venetian => f.write_str("venetian"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: usize,
    /// Segment id (`0..segments`) of every row.
    pub assignment: Vec<usize>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SegmentPlan {
    pub fn nrows(&self) -> usize {
        self.assignment.len()
    }

    /// Rows of segment `k`, ascending.
    pub fn validation_rows(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == k).then_some(i))
            .collect()
    }

    /// Rows outside segment `k`, ascending.
    pub fn training_rows(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s != k).then_some(i))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.segments];
        for &s in &self.assignment {
            sizes[s] += 1;
        }
        sizes
    }

    /// Checks that the plan is a partition of `rows` rows into non-empty segments.
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.assignment.len() != rows {
            return Err(Error::ShapeMismatch(format!(
                "plan covers {} rows, data has {rows}",
                self.assignment.len()
            )));
        }
        if self.segments < 2 || self.segments > rows {
            return Err(Error::BadSegmentCount {
                segments: self.segments,
                rows,
            });
        }
        if self.assignment.iter().any(|&s| s >= self.segments) || self.sizes().contains(&0) {
            return Err(Error::InvalidParameter("plan has an empty or out-of-range segment".into()));
        }
        Ok(())
    }
}

pub fn make_splits(rows: usize, segments: usize, seed: u64, scheme: Scheme) -> Result<SegmentPlan> {
    if segments < 2 || segments > rows {
        return Err(Error::BadSegmentCount { segments, rows });
    }
    let assignment = match scheme {
        Scheme::Venetian => (0..rows).map(|i| i % segments).collect(),
        Scheme::Random => {
            let mut order: Vec<usize> = (0..rows).collect();
            order.shuffle(&mut rng(seed));
            let base = rows / segments;
            let extra = rows % segments;
            let mut assignment = vec![0; rows];
            let mut pos = 0;
            for k in 0..segments {
                let size = base + usize::from(k < extra);
                for &row in &order[pos..pos + size] {
                    assignment[row] = k;
                }
                pos += size;
            }
            assignment
        }
    };
    Ok(SegmentPlan {
        segments,
        assignment,
        seed,
        scheme,
    })
}
