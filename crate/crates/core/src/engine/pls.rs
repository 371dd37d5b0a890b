use nalgebra::{DMatrix, DVector};

use super::{misaligned, residual, simpls, to_original_units, CRatioReport, GenerateOptions, Method, PlsComponents, PvMeta, PvSet};
use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Preprocessor};
use crate::resampling::SegmentPlan;

/// Magnitude of `c_{k,a} / c_a` above which a ratio is reported.
pub const DEFAULT_CRATIO_MAX: f64 = 2.0;

/// Global PLS model. The response is centered only.
#[derive(Debug, Clone, PartialEq)]
pub struct PvModelPls {
    pub pre: Preprocessor,
    pub mean_y: f64,
    pub components: PlsComponents,
}

impl PvModelPls {
    pub fn fit(x: &DataMatrix, y: &[f64], ncomp: usize, standardize: bool) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::ShapeMismatch(format!("{} responses for {} rows", y.len(), x.nrows())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: x.ncols() });
        }
        let pre = Preprocessor::fit(x.as_matrix(), standardize)?;
        let xs = pre.apply(x.as_matrix());
        let mean_y = y.iter().sum::<f64>() / y.len() as f64;
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean_y));
        let components = simpls(&xs, &yc, ncomp)?;
        Ok(PvModelPls {
            pre,
            mean_y,
            components,
        })
    }

    pub fn ncomp(&self) -> usize {
        self.components.ncomp()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut yhat = self.components.predict(&self.pre.apply(x));
        yhat.add_scalar_mut(self.mean_y);
        yhat
    }
}

fn local_fit(xs: &DMatrix<f64>, yc: &DVector<f64>, rows: &[usize], ncomp: usize, segment: usize) -> Result<PlsComponents> {
    let xt = xs.select_rows(rows);
    let yt = yc.select_rows(rows);
    if ncomp + 1 > xt.nrows() {
        return Err(Error::SegmentRankDeficient(segment + 1));
    }
    simpls(&xt, &yt, ncomp).map_err(|e| match e {
        Error::RankDeficient(_) => Error::SegmentRankDeficient(segment + 1),
        other => other,
    })
}

/// Generates one PV-set from a PLS model and returns it with the
/// `c_{k,a} / c_a` ratios of every segment.
///
/// Local scores `T_k = X_k W_k` are rescaled per component by
/// `c_{k,a} / c_a` and placed on the global loadings, so the global model
/// predicts for a generated row what the local model predicted for its
/// source. Local residuals `X_k (I - W_k P_kᵀ)` go through the global
/// projector `I - WPᵀ` and keep their squared norms.
pub fn generate_pv_pls(
    x: &DataMatrix,
    y: &[f64],
    ncomp: usize,
    plan: &SegmentPlan,
    opts: &GenerateOptions,
) -> Result<(PvSet, CRatioReport)> {
    plan.validate(x.nrows())?;
    let model = PvModelPls::fit(x, y, ncomp, opts.standardize)?;
    let xs = model.pre.apply(x.as_matrix());
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - model.mean_y));
    let global = &model.components;
    // P (WᵀP)⁻¹ equals P in exact arithmetic; using it keeps XpvW equal to
    // the scaled local scores when the scores lose orthogonality to rounding
    let loadings = match (global.w.transpose() * &global.p).try_inverse() {
        Some(inv) => &global.p * inv,
        None => return Err(Error::RankDeficient(ncomp)),
    };
    let mut out = DMatrix::zeros(xs.nrows(), xs.ncols());
    let mut ratios = DMatrix::zeros(plan.segments, ncomp);

    for k in 0..plan.segments {
        let mut local = local_fit(&xs, &yc, &plan.training_rows(k), ncomp, k)?;
        for a in misaligned(&global.w, &local.w) {
            local.flip(a);
        }
        let rows = plan.validation_rows(k);
        let xk = xs.select_rows(&rows);
        let tk = &xk * &local.w;
        let ek = &xk - &tk * local.p.transpose();

        let mut scores = tk;
        for (a, mut col) in scores.column_iter_mut().enumerate() {
            let d = local.c[a] / global.c[a];
            ratios[(k, a)] = d;
            col *= d;
        }
        let explained = scores * loadings.transpose();
        let projected = &ek - (&ek * &global.w) * loadings.transpose();
        let resid = residual::restore(&ek, projected, k, &rows)?;
        for (i, &row) in rows.iter().enumerate() {
            out.set_row(row, &(explained.row(i) + resid.row(i)));
        }
    }

    let report = CRatioReport::new(ratios, opts.cratio_max);
    for w in report.warnings() {
        log::warn!(
            "c-ratio {:.3} for segment {}, component {} exceeds {}",
            w.ratio,
            w.segment,
            w.component,
            report.threshold
        );
    }
    let set = PvSet {
        x: to_original_units(&model.pre, &out)?,
        meta: PvMeta {
            method: Method::Pls,
            segments: plan.segments,
            ncomp,
            seed: plan.seed,
            scheme: plan.scheme,
            standardize: opts.standardize,
            scale_scores: None,
            cratio_max: Some(report.max_abs),
        },
    };
    Ok((set, report))
}
