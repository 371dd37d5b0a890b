use nalgebra::{DMatrix, DVector};

/// PLS1 by NIPALS with deflation of `x`.
#[derive(Debug, Clone)]
pub(crate) struct Pls1 {
    /// Weights for undeflated data, `R = W (PᵀW)⁻¹`, scaled to unit
    /// columns with `c` rescaled to match.
    pub r: DMatrix<f64>,
    pub c: Vec<f64>,
}

impl Pls1 {
    pub fn coefficients(&self) -> DVector<f64> {
        &self.r * DVector::from_column_slice(&self.c)
    }
}

/// `None` when a component cannot be extracted.
pub(crate) fn pls1(x: &DMatrix<f64>, y: &DVector<f64>, ncomp: usize) -> Option<Pls1> {
    let m = x.ncols();
    let mut xd = x.clone();
    let mut w = DMatrix::zeros(m, ncomp);
    let mut p = DMatrix::zeros(m, ncomp);
    let mut c = Vec::with_capacity(ncomp);
    for a in 0..ncomp {
        let wa = xd.transpose() * y;
        let norm = wa.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        let wa = wa / norm;
        let t = &xd * &wa;
        let tt = t.norm_squared();
        if tt == 0.0 {
            return None;
        }
        let pa = xd.transpose() * &t / tt;
        c.push(y.dot(&t) / tt);
        xd -= &t * pa.transpose();
        w.set_column(a, &wa);
        p.set_column(a, &pa);
    }
    let ptw = p.transpose() * &w;
    let mut r = &w * ptw.try_inverse()?;
    for (a, mut col) in r.column_iter_mut().enumerate() {
        let n = col.norm();
        col /= n;
        c[a] *= n;
    }
    Some(Pls1 { r, c })
}
