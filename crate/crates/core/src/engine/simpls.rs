use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Single-response PLS decomposition fitted with SIMPLS.
///
/// `w` holds unit-norm weights, so scores are `T = XW`; `p` are the
/// x-loadings and `c` the y-loadings, giving `X ≈ TPᵀ` and `ŷ = Tc`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsComponents {
    pub w: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub c: DVector<f64>,
}

const COLLAPSE_TOL: f64 = 1e-12;
const ZERO_LOADING: f64 = 1e-14;

impl PlsComponents {
    pub fn ncomp(&self) -> usize {
        self.c.len()
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.w
    }

    /// Regression vector `b = Wc`, so that `ŷ = Xb`.
    pub fn coefficients(&self) -> DVector<f64> {
        &self.w * &self.c
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * self.coefficients()
    }

    /// `I - WPᵀ`, the projector onto the residual space of the model.
    pub fn residual_projector(&self) -> DMatrix<f64> {
        let m = self.w.nrows();
        DMatrix::identity(m, m) - &self.w * self.p.transpose()
    }

    /// Reverses the orientation of component `a`.
    pub(crate) fn flip(&mut self, a: usize) {
        self.w.column_mut(a).neg_mut();
        self.p.column_mut(a).neg_mut();
        self.c[a] = -self.c[a];
    }
}

/// Fits `ncomp` SIMPLS components to a preprocessed predictor matrix and a
/// centered response.
pub fn simpls(x: &DMatrix<f64>, y: &DVector<f64>, ncomp: usize) -> Result<PlsComponents> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("{} responses for {n} rows", y.len())));
    }
    if ncomp == 0 || ncomp > m || ncomp + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "number of components {ncomp} must be in 1..={}",
            m.min(n.saturating_sub(1))
        )));
    }

    let mut s = x.transpose() * y;
    let s0 = s.norm();
    let xnorm = x.norm();
    if s0 == 0.0 || xnorm == 0.0 {
        return Err(Error::RankDeficient(1));
    }

    let mut w = DMatrix::zeros(m, ncomp);
    let mut p = DMatrix::zeros(m, ncomp);
    let mut c = DVector::zeros(ncomp);
    // orthonormal basis of the loadings, used to deflate s
    let mut basis = DMatrix::<f64>::zeros(m, ncomp);
    let mut scores = DMatrix::<f64>::zeros(n, ncomp);
    let mut score_norms = DVector::<f64>::zeros(ncomp);

    for a in 0..ncomp {
        let snorm = s.norm();
        if snorm <= COLLAPSE_TOL * s0 {
            return Err(Error::RankDeficient(a + 1));
        }
        let mut r = &s / snorm;
        let mut t = x * &r;
        for _ in 0..2 {
            // scores drift from orthogonality on ill-conditioned data; remove
            // the drift from t and r together so that t = Xr still holds
            let prev_t = scores.columns(0, a);
            let proj = (prev_t.transpose() * &t).component_div(&score_norms.rows(0, a));
            t -= prev_t * &proj;
            r -= w.columns(0, a) * &proj;
        }
        let rn = r.norm();
        r /= rn;
        t /= rn;
        let tt = t.norm_squared();
        if tt.sqrt() <= COLLAPSE_TOL * xnorm {
            return Err(Error::RankDeficient(a + 1));
        }
        let pa = x.transpose() * &t / tt;
        let ca = y.dot(&t) / tt;
        if ca.abs() < ZERO_LOADING {
            return Err(Error::ZeroYLoading(a + 1));
        }

        let mut v = pa.clone();
        for _ in 0..2 {
            // two passes of Gram-Schmidt keep the basis orthogonal to rounding
            let prev = basis.columns(0, a);
            let proj = prev.transpose() * &v;
            v -= prev * proj;
        }
        let vn = v.norm();
        if vn == 0.0 {
            return Err(Error::RankDeficient(a + 1));
        }
        v /= vn;
        let vs = v.dot(&s);
        s -= &v * vs;

        w.set_column(a, &r);
        p.set_column(a, &pa);
        c[a] = ca;
        basis.set_column(a, &v);
        scores.set_column(a, &t);
        score_norms[a] = tt;
    }
    Ok(PlsComponents { w, p, c })
}
