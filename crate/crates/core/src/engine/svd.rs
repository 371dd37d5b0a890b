use nalgebra::DMatrix;

use super::{basis_rank_ok, misaligned, residual, to_original_units, GenerateOptions, Method, PvMeta, PvSet};
use crate::error::{Error, Result};
use crate::matrix::{svd_truncated, DataMatrix, Preprocessor, SvdBasis};
use crate::resampling::SegmentPlan;

/// Global SVD model: preprocessing plus a truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PvModelSvd {
    pub pre: Preprocessor,
    pub basis: SvdBasis,
}

impl PvModelSvd {
    pub fn fit(x: &DataMatrix, ncomp: usize, standardize: bool) -> Result<Self> {
        let pre = Preprocessor::fit(x.as_matrix(), standardize)?;
        let xs = pre.apply(x.as_matrix());
        let basis = svd_truncated(&xs, ncomp)?;
        if !basis_rank_ok(&basis, xs.shape()) {
            return Err(Error::RankDeficient(ncomp));
        }
        Ok(PvModelSvd { pre, basis })
    }

    pub fn ncomp(&self) -> usize {
        self.basis.ncomp()
    }
}

fn local_basis(xs: &DMatrix<f64>, rows: &[usize], ncomp: usize, segment: usize) -> Result<SvdBasis> {
    let xt = xs.select_rows(rows);
    if ncomp > xt.nrows().min(xt.ncols()) {
        return Err(Error::SegmentRankDeficient(segment + 1));
    }
    let basis = svd_truncated(&xt, ncomp)?;
    if !basis_rank_ok(&basis, xt.shape()) {
        return Err(Error::SegmentRankDeficient(segment + 1));
    }
    Ok(basis)
}

/// Generates one PV-set from an SVD model.
///
/// For segment `k` the local basis `V_k` (fitted without the segment's rows)
/// is sign-aligned to the global `V`, the segment's scores `T_k = X_k V_k`
/// are placed on the global basis, `T_k Vᵀ`, and the local residuals are
/// moved into the global residual space with their squared norms kept. With
/// `scale_scores` each score column is multiplied by `sigma_a / sigma_{k,a}`.
pub fn generate_pv_svd(
    x: &DataMatrix,
    ncomp: usize,
    plan: &SegmentPlan,
    opts: &GenerateOptions,
) -> Result<PvSet> {
    plan.validate(x.nrows())?;
    let model = PvModelSvd::fit(x, ncomp, opts.standardize)?;
    let xs = model.pre.apply(x.as_matrix());
    let v = &model.basis.v;
    let mut out = DMatrix::zeros(xs.nrows(), xs.ncols());

    for k in 0..plan.segments {
        let mut local = local_basis(&xs, &plan.training_rows(k), ncomp, k)?;
        for a in misaligned(v, &local.v) {
            local.v.column_mut(a).neg_mut();
        }
        let rows = plan.validation_rows(k);
        let xk = xs.select_rows(&rows);
        let tk = &xk * &local.v;
        let ek = &xk - &tk * local.v.transpose();

        let mut scores = tk;
        if opts.scale_scores {
            for (a, mut col) in scores.column_iter_mut().enumerate() {
                col *= model.basis.sigma[a] / local.sigma[a];
            }
        }
        let explained = scores * v.transpose();
        let projected = &ek - (&ek * v) * v.transpose();
        let resid = residual::restore(&ek, projected, k, &rows)?;
        for (i, &row) in rows.iter().enumerate() {
            out.set_row(row, &(explained.row(i) + resid.row(i)));
        }
    }

    Ok(PvSet {
        x: to_original_units(&model.pre, &out)?,
        meta: PvMeta {
            method: Method::Svd,
            segments: plan.segments,
            ncomp,
            seed: plan.seed,
            scheme: plan.scheme,
            standardize: opts.standardize,
            scale_scores: Some(opts.scale_scores),
            cratio_max: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::distances;
    use crate::resampling::{make_splits, Scheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))).unwrap()
    }

    fn opts(scale_scores: bool) -> GenerateOptions {
        GenerateOptions {
            standardize: false,
            scale_scores,
            ..Default::default()
        }
    }

    #[test]
    fn duplicated_block_reproduces_source() {
        let block = random(4, 3, 8).into_inner();
        let mut x = DMatrix::zeros(8, 3);
        x.rows_mut(0, 4).copy_from(&block);
        x.rows_mut(4, 4).copy_from(&block);
        let x = DataMatrix::new(x).unwrap();
        let plan = SegmentPlan {
            segments: 2,
            assignment: vec![0, 0, 0, 0, 1, 1, 1, 1],
            seed: 0,
            scheme: Scheme::Venetian,
        };
        let pv = generate_pv_svd(&x, 3, &plan, &opts(false)).unwrap();
        let diff = (pv.x.as_matrix() - x.as_matrix()).amax();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn q_rule_against_brute_force_projection() {
        let x = random(12, 5, 12);
        let plan = make_splits(12, 3, 5, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 2, &plan, &opts(false)).unwrap();

        // independent evaluation: explicit projectors for both sides
        let pre = Preprocessor::fit(x.as_matrix(), false).unwrap();
        let xs = pre.apply(x.as_matrix());
        let xpv = pre.apply(pv.x.as_matrix());
        let global = svd_truncated(&xs, 2).unwrap();
        for k in 0..3 {
            let local = svd_truncated(&xs.select_rows(&plan.training_rows(k)), 2).unwrap();
            let rows = plan.validation_rows(k);
            for a in 1..=2 {
                let qk = distances(&xs.select_rows(&rows), &local, a).unwrap().q;
                let qpv = distances(&xpv.select_rows(&rows), &global, a).unwrap().q;
                for (l, g) in qk.iter().zip(qpv.iter()) {
                    assert!((l - g).abs() <= 1e-8 * l.max(1.0), "{l} vs {g}");
                }
            }
        }
    }

    #[test]
    fn h_rule_with_score_scaling() {
        let x = random(20, 6, 3);
        let plan = make_splits(20, 4, 9, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 3, &plan, &opts(true)).unwrap();
        let pre = Preprocessor::fit(x.as_matrix(), false).unwrap();
        let xs = pre.apply(x.as_matrix());
        let xpv = pre.apply(pv.x.as_matrix());
        let global = svd_truncated(&xs, 3).unwrap();
        for k in 0..4 {
            let local = svd_truncated(&xs.select_rows(&plan.training_rows(k)), 3).unwrap();
            let rows = plan.validation_rows(k);
            for a in 1..=3 {
                let dk = distances(&xs.select_rows(&rows), &local, a).unwrap();
                let dpv = distances(&xpv.select_rows(&rows), &global, a).unwrap();
                for (l, g) in dk.h.iter().zip(dpv.h.iter()) {
                    assert!((l - g).abs() <= 1e-8 * l.max(1.0));
                }
            }
            // residual distance is kept at the full component count
            let qk = distances(&xs.select_rows(&rows), &local, 3).unwrap().q;
            let qpv = distances(&xpv.select_rows(&rows), &global, 3).unwrap().q;
            for (l, g) in qk.iter().zip(qpv.iter()) {
                assert!((l - g).abs() <= 1e-8 * l.max(1.0));
            }
        }
    }

    #[test]
    fn full_rank_is_pure_rotation() {
        let x = random(9, 4, 21);
        let plan = make_splits(9, 3, 1, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 4, &plan, &opts(false)).unwrap();
        let pre = Preprocessor::fit(x.as_matrix(), false).unwrap();
        let xs = pre.apply(x.as_matrix());
        let xpv = pre.apply(pv.x.as_matrix());
        let global = svd_truncated(&xs, 4).unwrap();
        for k in 0..3 {
            let mut local = svd_truncated(&xs.select_rows(&plan.training_rows(k)), 4).unwrap();
            for a in 0..4 {
                if global.v.column(a).dot(&local.v.column(a)) < 0.0 {
                    local.v.column_mut(a).neg_mut();
                }
            }
            let rows = plan.validation_rows(k);
            let direct = xs.select_rows(&rows) * &local.v * global.v.transpose();
            let got = xpv.select_rows(&rows);
            assert!((direct - got).amax() < 1e-12);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let x = random(15, 5, 4);
        let a = make_splits(15, 3, 1, Scheme::Random).unwrap();
        let b = make_splits(15, 3, 2, Scheme::Random).unwrap();
        let pa = generate_pv_svd(&x, 2, &a, &opts(true)).unwrap();
        let pb = generate_pv_svd(&x, 2, &b, &opts(true)).unwrap();
        assert!((pa.x.as_matrix() - pb.x.as_matrix()).amax() > 0.0);
    }

    #[test]
    fn too_many_components_for_a_segment() {
        let x = random(6, 5, 4);
        let plan = make_splits(6, 2, 1, Scheme::Random).unwrap();
        // local training sets have 3 rows
        let err = generate_pv_svd(&x, 4, &plan, &opts(false)).unwrap_err();
        assert!(matches!(err, Error::SegmentRankDeficient(_)), "{err:?}");
    }

    #[test]
    fn plan_must_match_rows() {
        let x = random(6, 3, 4);
        let plan = make_splits(7, 2, 1, Scheme::Random).unwrap();
        assert!(matches!(
            generate_pv_svd(&x, 2, &plan, &opts(false)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn output_in_original_units() {
        let mut x = random(16, 4, 6).into_inner();
        x.column_mut(2).add_scalar_mut(100.0);
        x.column_mut(3).scale_mut(50.0);
        let x = DataMatrix::new(x).unwrap();
        let plan = make_splits(16, 4, 3, Scheme::Random).unwrap();
        let pv = generate_pv_svd(
            &x,
            2,
            &plan,
            &GenerateOptions {
                standardize: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mean = pv.x.as_matrix().column(2).mean();
        assert!((mean - 100.0).abs() < 5.0);
    }
}
