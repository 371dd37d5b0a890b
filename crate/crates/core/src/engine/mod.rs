//! Procrustes validation set (PV-set) generation.
//!
//! A global latent-variable model is fitted to all rows. For every
//! cross-validation segment a local model is fitted to the remaining rows and
//! the segment's rows are re-expressed so that the global model sees them the
//! way the local model saw the originals: same residual distance `q` (and
//! score distance `h`) for SVD, same predicted response for PLS.
//!
//! All work happens in preprocessed space; generated rows are mapped back to
//! original units with the global [`Preprocessor`] and written at the row
//! positions of their source rows.

mod augment;
mod pls;
mod residual;
mod simpls;
mod svd;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::matrix::{DataMatrix, Preprocessor, SvdBasis};
use crate::resampling::Scheme;

pub use augment::{augment, AugmentMeta, AugmentOptions, AugmentedDataset, SetWarning, Target};
pub use pls::{generate_pv_pls, PvModelPls, DEFAULT_CRATIO_MAX};
pub use simpls::{simpls, PlsComponents};
pub use svd::{generate_pv_svd, PvModelSvd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svd,
    Pls,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Svd => f.write_str("svd"),
            Method::Pls => f.write_str("pls"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(Method::Svd),
            "pls" => Ok(Method::Pls),
            other => Err(format!("unknown method {other:?}, expected svd or pls")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvMeta {
    pub method: Method,
    pub segments: usize,
    pub ncomp: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub standardize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_scores: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cratio_max: Option<f64>,
}

/// A generated predictor matrix, row-aligned with its source.
#[derive(Debug, Clone, PartialEq)]
pub struct PvSet {
    pub x: DataMatrix,
    pub meta: PvMeta,
}

/// `c_{k,a} / c_a` for every segment `k` (rows) and component `a` (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CRatioReport {
    pub ratios: DMatrix<f64>,
    pub max_abs: f64,
    pub threshold: f64,
}

/// A ratio beyond the recommended magnitude; 1-based segment and component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CRatioWarning {
    pub segment: usize,
    pub component: usize,
    pub ratio: f64,
}

impl CRatioReport {
    pub(crate) fn new(ratios: DMatrix<f64>, threshold: f64) -> Self {
        let max_abs = ratios.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        CRatioReport {
            ratios,
            max_abs,
            threshold,
        }
    }

    /// Ratios whose magnitude exceeds the threshold.
    pub fn warnings(&self) -> Vec<CRatioWarning> {
        let mut out = Vec::new();
        for k in 0..self.ratios.nrows() {
            for a in 0..self.ratios.ncols() {
                let ratio = self.ratios[(k, a)];
                if ratio.abs() > self.threshold {
                    out.push(CRatioWarning {
                        segment: k + 1,
                        component: a + 1,
                        ratio,
                    });
                }
            }
        }
        out
    }
}

/// Everything that defines how a single PV-set is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub standardize: bool,
    /// SVD only: rescale local scores by `sigma_a / sigma_{k,a}`.
    pub scale_scores: bool,
    /// PLS only: ratios beyond this magnitude are reported.
    pub cratio_max: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            standardize: false,
            scale_scores: true,
            cratio_max: DEFAULT_CRATIO_MAX,
        }
    }
}

/// Components of `local` pointing away from the matching column of `global`.
pub(crate) fn misaligned(global: &DMatrix<f64>, local: &DMatrix<f64>) -> Vec<usize> {
    (0..global.ncols())
        .filter(|&a| global.column(a).dot(&local.column(a)) < 0.0)
        .collect()
}

pub(crate) fn basis_rank_ok(basis: &SvdBasis, shape: (usize, usize)) -> bool {
    let tol = basis.sigma[0] * shape.0.max(shape.1) as f64 * f64::EPSILON;
    basis.sigma.iter().all(|&s| s > tol)
}

pub(crate) fn to_original_units(pre: &Preprocessor, x: &DMatrix<f64>) -> crate::error::Result<DataMatrix> {
    DataMatrix::new(pre.invert(x))
}
