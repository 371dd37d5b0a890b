//! Dense matrices, column preprocessing, truncated SVD and the two model
//! distances (`q`, lack of fit; `h`, extremeness) used throughout the crate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated dense matrix: at least one row and one column, every value finite.
///
/// Indexing is `(row, column)`; rows are observations and columns variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidDimensions(format!(
                "matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(DataMatrix(values))
    }

    /// Builds a matrix from values listed row after row.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::InvalidDimensions(format!(
                "row {bad} has {} values, expected {ncols}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), ncols, &flat)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix(self.0.select_rows(rows))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&DataMatrix]) -> Result<DataMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidDimensions("nothing to stack".into()))?;
        let ncols = first.ncols();
        if parts.iter().any(|p| p.ncols() != ncols) {
            return Err(Error::ShapeMismatch("stacked matrices differ in column count".into()));
        }
        let nrows = parts.iter().map(|p| p.nrows()).sum();
        let mut out = DMatrix::zeros(nrows, ncols);
        let mut at = 0;
        for p in parts {
            out.rows_mut(at, p.nrows()).copy_from(&p.0);
            at += p.nrows();
        }
        Ok(DataMatrix(out))
    }
}

/// Column centering and optional standardization, fitted on one matrix and
/// applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub standardize: bool,
}

impl Preprocessor {
    /// Column means, and sample standard deviations (denominator `I - 1`)
    /// when `standardize` is set. A single-row matrix is centered only.
    pub fn fit(x: &DMatrix<f64>, standardize: bool) -> Result<Self> {
        let (n, m) = x.shape();
        let mut mean = Vec::with_capacity(m);
        let mut scale = Vec::with_capacity(m);
        for j in 0..m {
            let col = x.column(j);
            let mu = col.sum() / n as f64;
            mean.push(mu);
            if !standardize {
                scale.push(1.0);
                continue;
            }
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if lo == hi {
                return Err(Error::ZeroVarianceColumn(j));
            }
            let ss: f64 = col.iter().map(|v| (v - mu) * (v - mu)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::ZeroVarianceColumn(j));
            }
            scale.push(sd);
        }
        Ok(Preprocessor {
            mean,
            scale,
            standardize,
        })
    }

    pub fn identity(ncols: usize) -> Self {
        Preprocessor {
            mean: vec![0.0; ncols],
            scale: vec![1.0; ncols],
            standardize: false,
        }
    }

    pub fn ncols(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.ncols(), "preprocessor column count");
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = (*v - mu) / s);
        }
        out
    }

    pub fn invert(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.ncols(), "preprocessor column count");
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = *v * s + mu);
        }
        out
    }
}

/// Right singular vectors (columns of `v`, orthonormal) and the matching
/// non-increasing singular values of a truncated decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdBasis {
    pub v: DMatrix<f64>,
    pub sigma: DVector<f64>,
}

impl SvdBasis {
    pub fn ncomp(&self) -> usize {
        self.sigma.len()
    }

    /// First `a` columns of `v`.
    pub fn v_a(&self, a: usize) -> DMatrix<f64> {
        self.v.columns(0, a).into_owned()
    }

    /// Eigenvalues of the covariance matrix, `sigma^2 / (rows - 1)`.
    pub fn eigenvalues(&self, rows: usize) -> Vec<f64> {
        let d = (rows.max(2) - 1) as f64;
        self.sigma.iter().map(|s| s * s / d).collect()
    }
}

/// Flips every column so that its largest-magnitude entry is positive.
pub(crate) fn sign_normalize_columns(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Rank-`a` truncated singular value decomposition of an (already
/// preprocessed) matrix. Columns of `v` are sign-normalized.
pub fn svd_truncated(x: &DMatrix<f64>, a: usize) -> Result<SvdBasis> {
    let (n, m) = x.shape();
    if a == 0 || a > n.min(m) {
        return Err(Error::InvalidParameter(format!(
            "number of components {a} must be in 1..={}",
            n.min(m)
        )));
    }
    let svd = nalgebra::SVD::try_new(x.clone(), false, true, f64::EPSILON, 0)
        .ok_or(Error::DidNotConverge)?;
    let v_t = svd.v_t.ok_or(Error::DidNotConverge)?;
    let mut v = v_t.rows(0, a).transpose();
    sign_normalize_columns(&mut v);
    let sigma = DVector::from_iterator(a, svd.singular_values.iter().take(a).copied());
    Ok(SvdBasis { v, sigma })
}

/// `q` (squared residual distance) and `h` (squared Mahalanobis score
/// distance) of every row for one component count.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePair {
    pub ncomp: usize,
    pub q: Vec<f64>,
    pub h: Vec<f64>,
}

/// Distances of the rows of `x` to the first `a` components of `basis`.
pub fn distances(x: &DMatrix<f64>, basis: &SvdBasis, a: usize) -> Result<DistancePair> {
    if a == 0 || a > basis.ncomp() {
        return Err(Error::InvalidParameter(format!(
            "component count {a} outside 1..={}",
            basis.ncomp()
        )));
    }
    if x.ncols() != basis.v.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} columns against a basis for {} variables",
            x.ncols(),
            basis.v.nrows()
        )));
    }
    if let Some(b) = (0..a).find(|&b| basis.sigma[b] == 0.0) {
        return Err(Error::ZeroSingularValue(b + 1));
    }
    let va = basis.v.columns(0, a);
    let t = x * va;
    let e = x - &t * va.transpose();
    let q = e.row_iter().map(|r| r.norm_squared()).collect();
    let h = t
        .row_iter()
        .map(|r| {
            r.iter()
                .zip(basis.sigma.iter())
                .map(|(t, s)| (t / s) * (t / s))
                .sum()
        })
        .collect();
    Ok(DistancePair { ncomp: a, q, h })
}

/// Distances for every component count `1..=basis.ncomp()`.
pub fn distances_all(x: &DMatrix<f64>, basis: &SvdBasis) -> Result<Vec<DistancePair>> {
    (1..=basis.ncomp()).map(|a| distances(x, basis, a)).collect()
}
