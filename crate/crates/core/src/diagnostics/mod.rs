//! Independent verification of generated PV-sets.
//!
//! Nothing here reuses the generator's fitted state or its decompositions:
//! preprocessing is recomputed, SVD models come from a one-sided Jacobi
//! routine and PLS models from NIPALS. Agreement with the generator is
//! therefore evidence, not tautology.
//!
//! Relative deviations are `|ref - pv| / max(1, |ref|)`, with the reference
//! taken from the local model and the original rows.

mod jacobi;
mod nipals;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::resampling::SegmentPlan;

/// Tolerance on the relative deviation of every rule.
pub const RULE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// Residual distance of a row.
    Q,
    /// Score distance of a row.
    H,
    /// PLS prediction of a row.
    Yhat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: Rule,
    /// Number of components the rule was evaluated with.
    pub component: usize,
    pub max_rel_dev: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub rules: Vec<RuleCheck>,
    /// Largest `|c_{k,a} / c_a|` (PLS only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cratio_max: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl RuleReport {
    fn from_devs(devs: Vec<(Rule, usize, f64)>, cratio_max: Option<f64>) -> Self {
        let rules: Vec<RuleCheck> = devs
            .into_iter()
            .map(|(rule, component, dev)| RuleCheck {
                rule,
                component,
                max_rel_dev: dev,
                pass: dev <= RULE_TOL,
            })
            .collect();
        let pass = rules.iter().all(|r| r.pass);
        RuleReport {
            rules,
            cratio_max,
            tolerance: RULE_TOL,
            pass,
        }
    }

    /// Combines reports of several sets or classes, keeping the worst
    /// deviation of every rule.
    pub fn merge(reports: &[RuleReport]) -> RuleReport {
        let mut devs: Vec<(Rule, usize, f64)> = Vec::new();
        let mut cratio: Option<f64> = None;
        for r in reports {
            for c in &r.rules {
                match devs.iter_mut().find(|(rule, a, _)| *rule == c.rule && *a == c.component) {
                    Some(entry) => entry.2 = entry.2.max(c.max_rel_dev),
                    None => devs.push((c.rule, c.component, c.max_rel_dev)),
                }
            }
            if let Some(m) = r.cratio_max {
                cratio = Some(cratio.map_or(m, |c| c.max(m)));
            }
        }
        devs.sort_by_key(|d| (d.0, d.1));
        RuleReport::from_devs(devs, cratio)
    }

    pub fn max_rel_dev(&self) -> f64 {
        self.rules.iter().fold(0.0, |m, r| m.max(r.max_rel_dev))
    }
}

fn check_shapes(x: &DataMatrix, xpv: &DataMatrix, plan: &SegmentPlan) -> Result<()> {
    if x.nrows() != xpv.nrows() || x.ncols() != xpv.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "original is {}x{}, PV-set is {}x{}",
            x.nrows(),
            x.ncols(),
            xpv.nrows(),
            xpv.ncols()
        )));
    }
    if plan.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "plan covers {} rows, data has {}",
            plan.nrows(),
            x.nrows()
        )));
    }
    plan.validate(x.nrows())
}

/// Centers (and scales) both matrices with the column statistics of `x`.
fn preprocess(x: &DataMatrix, xpv: &DataMatrix, standardize: bool) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x = x.as_matrix();
    let n = x.nrows() as f64;
    let mut xs = x.clone();
    let mut xpvs = xpv.as_matrix().clone();
    for j in 0..x.ncols() {
        let mean = x.column(j).iter().sum::<f64>() / n;
        let scale = if standardize {
            let ss: f64 = x.column(j).iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = (ss / (n - 1.0)).sqrt();
            if !(sd > 0.0) {
                return Err(Error::ZeroVarianceColumn(j));
            }
            sd
        } else {
            1.0
        };
        for m in [&mut xs, &mut xpvs] {
            for v in m.column_mut(j).iter_mut() {
                *v = (*v - mean) / scale;
            }
        }
    }
    Ok((xs, xpvs))
}

fn rel_dev(reference: f64, value: f64) -> f64 {
    (reference - value).abs() / reference.abs().max(1.0)
}

/// Cumulative `q` and `h` for component counts `1..=a`; entry `[b][i]`
/// holds row `i` with `b + 1` components.
fn cumulative_distances(x: &DMatrix<f64>, v: &DMatrix<f64>, sigma: &[f64], a: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut e = x.clone();
    let mut h = vec![0.0; x.nrows()];
    let mut qs = Vec::with_capacity(a);
    let mut hs = Vec::with_capacity(a);
    for b in 0..a {
        let vb = v.column(b);
        let t = &e * vb;
        e -= &t * vb.transpose();
        for (hi, ti) in h.iter_mut().zip(t.iter()) {
            *hi += (ti / sigma[b]) * (ti / sigma[b]);
        }
        qs.push(e.row_iter().map(|r| r.norm_squared()).collect());
        hs.push(h.clone());
    }
    (qs, hs)
}

/// Checks the SVD rules on a PV-set.
///
/// Without score scaling the residual distance `q` must match for every
/// component count `1..=ncomp`. With score scaling the score distance `h`
/// must match for every component count and `q` at `ncomp`; the scaled
/// scores move variance between the retained components, so `q` below
/// `ncomp` is not preserved.
pub fn check_rules_svd(
    x: &DataMatrix,
    xpv: &DataMatrix,
    plan: &SegmentPlan,
    ncomp: usize,
    standardize: bool,
    scale_scores: bool,
) -> Result<RuleReport> {
    check_shapes(x, xpv, plan)?;
    let (xs, xpvs) = preprocess(x, xpv, standardize)?;
    let global = jacobi::right_svd(&xs);
    if ncomp == 0 || ncomp > global.sigma.len() || global.sigma[ncomp - 1] <= 0.0 {
        return Err(Error::RankDeficient(ncomp));
    }

    let mut q_dev = vec![0.0f64; ncomp];
    let mut h_dev = vec![0.0f64; ncomp];
    for k in 0..plan.segments {
        let local = jacobi::right_svd(&xs.select_rows(&plan.training_rows(k)));
        if ncomp > local.sigma.len() || local.sigma[ncomp - 1] <= 0.0 {
            return Err(Error::SegmentRankDeficient(k + 1));
        }
        let rows = plan.validation_rows(k);
        let (qk, hk) = cumulative_distances(&xs.select_rows(&rows), &local.v, &local.sigma, ncomp);
        let (qp, hp) = cumulative_distances(&xpvs.select_rows(&rows), &global.v, &global.sigma, ncomp);
        for b in 0..ncomp {
            for i in 0..rows.len() {
                q_dev[b] = q_dev[b].max(rel_dev(qk[b][i], qp[b][i]));
                h_dev[b] = h_dev[b].max(rel_dev(hk[b][i], hp[b][i]));
            }
        }
    }

    let mut devs = Vec::new();
    if scale_scores {
        devs.extend((0..ncomp).map(|b| (Rule::H, b + 1, h_dev[b])));
        devs.push((Rule::Q, ncomp, q_dev[ncomp - 1]));
    } else {
        devs.extend((0..ncomp).map(|b| (Rule::Q, b + 1, q_dev[b])));
    }
    devs.sort_by_key(|d| (d.0, d.1));
    Ok(RuleReport::from_devs(devs, None))
}

/// Checks the PLS rule: the global model predicts for every generated row
/// what the local model of its segment predicted for the source row.
pub fn check_rules_pls(
    x: &DataMatrix,
    y: &[f64],
    xpv: &DataMatrix,
    plan: &SegmentPlan,
    ncomp: usize,
    standardize: bool,
) -> Result<RuleReport> {
    check_shapes(x, xpv, plan)?;
    if y.len() != x.nrows() {
        return Err(Error::ShapeMismatch(format!("{} responses for {} rows", y.len(), x.nrows())));
    }
    let (xs, xpvs) = preprocess(x, xpv, standardize)?;
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean_y));
    let global = nipals::pls1(&xs, &yc, ncomp).ok_or(Error::RankDeficient(ncomp))?;
    let b = global.coefficients();

    let mut dev = 0.0f64;
    let mut cratio = 0.0f64;
    for k in 0..plan.segments {
        let train = plan.training_rows(k);
        let local = nipals::pls1(&xs.select_rows(&train), &yc.select_rows(&train), ncomp)
            .ok_or(Error::SegmentRankDeficient(k + 1))?;
        let rows = plan.validation_rows(k);
        let yk = xs.select_rows(&rows) * local.coefficients();
        let ypv = xpvs.select_rows(&rows) * &b;
        for (l, g) in yk.iter().zip(ypv.iter()) {
            dev = dev.max(rel_dev(l + mean_y, g + mean_y));
        }
        for a in 0..ncomp {
            let sign = global.r.column(a).dot(&local.r.column(a)).signum();
            cratio = cratio.max((sign * local.c[a] / global.c[a]).abs());
        }
    }
    Ok(RuleReport::from_devs(vec![(Rule::Yhat, ncomp, dev)], Some(cratio)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    /// `‖cov(Xpv) - cov(X)‖_F / ‖cov(X)‖_F`.
    pub frobenius_rel_distance: f64,
    /// Per column, `mean(Xpv) - mean(X)`.
    pub mean_delta: Vec<f64>,
    /// Per column, `sd(Xpv) - sd(X)`.
    pub sd_delta: Vec<f64>,
}

fn covariance(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = x.nrows();
    let means: Vec<f64> = x.column_iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut centered = x.clone();
    for (j, mut c) in centered.column_iter_mut().enumerate() {
        c.add_scalar_mut(-means[j]);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    (cov, means)
}

/// Compares column covariance and moments of two equally shaped matrices.
/// Informational only.
pub fn covariance_summary(x: &DataMatrix, xpv: &DataMatrix) -> Result<CovarianceSummary> {
    if x.nrows() != xpv.nrows() || x.ncols() != xpv.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} against {}x{}",
            x.nrows(),
            x.ncols(),
            xpv.nrows(),
            xpv.ncols()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::InvalidDimensions("covariance needs two rows".into()));
    }
    let (cx, mx) = covariance(x.as_matrix());
    let (cp, mp) = covariance(xpv.as_matrix());
    let denom = cx.norm();
    let frobenius_rel_distance = if denom > 0.0 { (&cp - &cx).norm() / denom } else { (&cp - &cx).norm() };
    Ok(CovarianceSummary {
        frobenius_rel_distance,
        mean_delta: mp.iter().zip(&mx).map(|(p, o)| p - o).collect(),
        sd_delta: (0..x.ncols())
            .map(|j| cp[(j, j)].sqrt() - cx[(j, j)].sqrt())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{generate_pv_pls, generate_pv_svd, GenerateOptions};
    use crate::resampling::{make_splits, Scheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn collinear(n: usize, m: usize, rank: usize, seed: u64) -> (DataMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let scores = DMatrix::from_fn(n, rank, |_, _| g());
        let loadings = DMatrix::from_fn(rank, m, |_, _| g());
        let x = scores * loadings + DMatrix::from_fn(n, m, |_, _| 0.01 * g());
        let y = (0..n).map(|i| x[(i, 0)] - 2.0 * x[(i, 1)] + 0.1 * g()).collect();
        (DataMatrix::new(x).unwrap(), y)
    }

    fn opts(standardize: bool, scale_scores: bool) -> GenerateOptions {
        GenerateOptions {
            standardize,
            scale_scores,
            ..Default::default()
        }
    }

    #[test]
    fn engine_svd_sets_pass() {
        let (x, _) = collinear(30, 8, 4, 1);
        let plan = make_splits(30, 5, 11, Scheme::Random).unwrap();
        for (standardize, scale) in [(false, false), (true, false), (false, true), (true, true)] {
            let pv = generate_pv_svd(&x, 3, &plan, &opts(standardize, scale)).unwrap();
            let r = check_rules_svd(&x, &pv.x, &plan, 3, standardize, scale).unwrap();
            assert!(r.pass, "{r:?}");
            let rules: Vec<Rule> = r.rules.iter().map(|c| c.rule).collect();
            if scale {
                assert_eq!(rules, vec![Rule::Q, Rule::H, Rule::H, Rule::H]);
            } else {
                assert_eq!(rules, vec![Rule::Q; 3]);
            }
        }
    }

    #[test]
    fn noise_is_detected() {
        let (x, _) = collinear(30, 8, 4, 2);
        let plan = make_splits(30, 5, 3, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 3, &plan, &opts(false, false)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy = pv.x.as_matrix() + DMatrix::from_fn(30, 8, |_, _| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let r = check_rules_svd(&x, &DataMatrix::new(noisy).unwrap(), &plan, 3, false, false).unwrap();
        assert!(!r.pass);
        assert!(r.max_rel_dev() > 1e-4);
    }

    #[test]
    fn full_rank_q_is_zero() {
        let (x, _) = collinear(20, 4, 4, 3);
        let plan = make_splits(20, 4, 3, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 4, &plan, &opts(false, false)).unwrap();
        let r = check_rules_svd(&x, &pv.x, &plan, 4, false, false).unwrap();
        assert!(r.rules[3].max_rel_dev < 1e-12);
    }

    #[test]
    fn engine_pls_sets_pass_and_ratios_agree() {
        let (x, y) = collinear(40, 10, 5, 4);
        let plan = make_splits(40, 4, 8, Scheme::Random).unwrap();
        let (pv, report) = generate_pv_pls(&x, &y, 4, &plan, &opts(true, true)).unwrap();
        let r = check_rules_pls(&x, &y, &pv.x, &plan, 4, true).unwrap();
        assert!(r.pass, "{r:?}");
        let c = r.cratio_max.unwrap();
        assert!((c - report.max_abs).abs() < 1e-6 * c.max(1.0), "{c} vs {}", report.max_abs);
    }

    #[test]
    fn shuffled_rows_break_pls_rule() {
        let (x, y) = collinear(40, 10, 5, 5);
        let plan = make_splits(40, 4, 8, Scheme::Random).unwrap();
        let (pv, _) = generate_pv_pls(&x, &y, 3, &plan, &opts(false, true)).unwrap();
        let order: Vec<usize> = (0..40).rev().collect();
        let shuffled = pv.x.select_rows(&order);
        let r = check_rules_pls(&x, &y, &shuffled, &plan, 3, false).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn shape_mismatch() {
        let (x, _) = collinear(10, 4, 2, 6);
        let plan = make_splits(10, 2, 1, Scheme::Random).unwrap();
        let other = x.select_rows(&[0, 1, 2]);
        assert!(matches!(
            check_rules_svd(&x, &other, &plan, 2, false, false),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(covariance_summary(&x, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn covariance_of_identical_and_noise() {
        let (x, _) = collinear(50, 6, 2, 7);
        let same = covariance_summary(&x, &x).unwrap();
        assert_eq!(same.frobenius_rel_distance, 0.0);
        assert!(same.mean_delta.iter().all(|d| *d == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = DataMatrix::new(DMatrix::from_fn(50, 6, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng))).unwrap();
        let d = covariance_summary(&x, &noise).unwrap().frobenius_rel_distance;
        // direct value against the identity covariance of white noise
        let (cx, _) = covariance(x.as_matrix());
        let expected = (&cx - DMatrix::<f64>::identity(6, 6)).norm() / cx.norm();
        assert!((d - expected).abs() < 0.5 * expected, "{d} vs {expected}");

        let plan = make_splits(50, 5, 2, Scheme::Random).unwrap();
        let pv = generate_pv_svd(&x, 2, &plan, &opts(false, true)).unwrap();
        let engine = covariance_summary(&x, &pv.x).unwrap().frobenius_rel_distance;
        assert!(engine < d);
    }

    #[test]
    fn merge_keeps_worst() {
        let a = RuleReport::from_devs(vec![(Rule::Q, 1, 1e-12), (Rule::Q, 2, 1e-9)], None);
        let b = RuleReport::from_devs(vec![(Rule::Q, 1, 1e-6), (Rule::Q, 2, 1e-13)], None);
        let m = RuleReport::merge(&[a, b]);
        assert_eq!(m.rules[0].max_rel_dev, 1e-6);
        assert_eq!(m.rules[1].max_rel_dev, 1e-9);
        assert!(!m.pass);
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["rules"][0]["rule"], "q");
        assert!(json["rules"][0].get("max_rel_dev").is_some());
    }
}
