use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_pv_pls, generate_pv_svd, CRatioWarning, GenerateOptions, Method, DEFAULT_CRATIO_MAX};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::resampling::{derive_seeds, make_splits, Scheme};

/// What travels with the predictor rows.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    None,
    Response(&'a [f64]),
    /// Class index of every row.
    Classes(&'a [usize]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOptions {
    pub method: Method,
    pub ncomp: usize,
    pub segments: usize,
    pub n_sets: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub standardize: bool,
    pub scale_scores: bool,
    /// SVD only: generate each class separately from its own model.
    pub per_class: bool,
    pub cratio_max: f64,
    /// Generate sets on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            method: Method::Svd,
            ncomp: 2,
            segments: 4,
            n_sets: 1,
            seed: 0,
            scheme: Scheme::Random,
            standardize: false,
            scale_scores: true,
            per_class: false,
            cratio_max: DEFAULT_CRATIO_MAX,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetWarning {
    /// 1-based PV-set number.
    pub set: usize,
    #[serde(flatten)]
    pub ratio: CRatioWarning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentMeta {
    pub method: Method,
    pub ncomp: usize,
    pub segments: usize,
    pub n_sets: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub standardize: bool,
    pub scale_scores: bool,
    pub per_class: bool,
    /// Seed of every set's segment plan, derived from `seed`.
    pub set_seeds: Vec<u64>,
    /// Largest `|c_{k,a} / c_a|` of each set (PLS only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cratio_max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<SetWarning>,
}

/// Original rows followed by `n_sets` generated copies.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub x: DataMatrix,
    pub response: Option<Vec<f64>>,
    pub classes: Option<Vec<usize>>,
    pub meta: AugmentMeta,
}

struct SetOutput {
    x: DataMatrix,
    cratio_max: Option<f64>,
    warnings: Vec<CRatioWarning>,
}

fn validate(x: &DataMatrix, target: &Target<'_>, opts: &AugmentOptions) -> Result<()> {
    let n = x.nrows();
    let len = match target {
        Target::None => n,
        Target::Response(y) => y.len(),
        Target::Classes(c) => c.len(),
    };
    if len != n {
        return Err(Error::ShapeMismatch(format!("target has {len} entries for {n} rows")));
    }
    if opts.ncomp == 0 {
        return Err(Error::InvalidParameter("number of components must be at least 1".into()));
    }
    match (opts.method, target) {
        (Method::Pls, Target::None) => Err(Error::InvalidParameter("PLS needs a response or classes".into())),
        (Method::Pls, _) if opts.per_class => {
            Err(Error::InvalidParameter("per-class generation is only available for SVD".into()))
        }
        (Method::Pls, Target::Classes(c)) if c.iter().any(|&l| l > 1) => Err(Error::InvalidParameter(
            "PLS with classes needs exactly two of them".into(),
        )),
        (Method::Svd, Target::Classes(_)) | (Method::Pls, _) => Ok(()),
        (Method::Svd, _) if opts.per_class => Err(Error::InvalidParameter("per-class generation needs classes".into())),
        (Method::Svd, _) => Ok(()),
    }
}

fn generate_set(x: &DataMatrix, target: &Target<'_>, opts: &AugmentOptions, seed: u64) -> Result<SetOutput> {
    let gen = GenerateOptions {
        standardize: opts.standardize,
        scale_scores: opts.scale_scores,
        cratio_max: opts.cratio_max,
    };
    match opts.method {
        Method::Svd if opts.per_class => {
            let Target::Classes(labels) = target else {
                unreachable!("checked in validate")
            };
            let nclass = labels.iter().max().map_or(0, |m| m + 1);
            let class_seeds = derive_seeds(seed, nclass);
            let mut out = x.as_matrix().clone();
            for (class, &class_seed) in class_seeds.iter().enumerate() {
                let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
                if rows.is_empty() {
                    continue;
                }
                if rows.len() < opts.segments {
                    return Err(Error::ClassTooSmall {
                        class: class.to_string(),
                        size: rows.len(),
                        segments: opts.segments,
                    });
                }
                let sub = x.select_rows(&rows);
                let plan = make_splits(rows.len(), opts.segments, class_seed, opts.scheme)?;
                let pv = generate_pv_svd(&sub, opts.ncomp, &plan, &gen)?;
                for (i, &row) in rows.iter().enumerate() {
                    out.set_row(row, &pv.x.as_matrix().row(i));
                }
            }
            Ok(SetOutput {
                x: DataMatrix::new(out)?,
                cratio_max: None,
                warnings: Vec::new(),
            })
        }
        Method::Svd => {
            let plan = make_splits(x.nrows(), opts.segments, seed, opts.scheme)?;
            Ok(SetOutput {
                x: generate_pv_svd(x, opts.ncomp, &plan, &gen)?.x,
                cratio_max: None,
                warnings: Vec::new(),
            })
        }
        Method::Pls => {
            let y: Vec<f64> = match target {
                Target::Response(y) => y.to_vec(),
                Target::Classes(c) => c.iter().map(|&l| l as f64).collect(),
                Target::None => unreachable!("checked in validate"),
            };
            let plan = make_splits(x.nrows(), opts.segments, seed, opts.scheme)?;
            let (pv, report) = generate_pv_pls(x, &y, opts.ncomp, &plan, &gen)?;
            Ok(SetOutput {
                x: pv.x,
                cratio_max: Some(report.max_abs),
                warnings: report.warnings(),
            })
        }
    }
}

/// Appends `opts.n_sets` PV-sets to `x`.
///
/// Set `n` uses the `n`-th seed drawn from `opts.seed`; with `per_class` each
/// class gets its own plan seeded from the set's seed. Targets are repeated
/// for every set since generated rows inherit the target of their source.
pub fn augment(x: &DataMatrix, target: Target<'_>, opts: &AugmentOptions) -> Result<AugmentedDataset> {
    validate(x, &target, opts)?;
    let set_seeds = derive_seeds(opts.seed, opts.n_sets);
    let sets: Vec<SetOutput> = if opts.parallel {
        set_seeds
            .par_iter()
            .map(|&s| generate_set(x, &target, opts, s))
            .collect::<Result<_>>()?
    } else {
        set_seeds
            .iter()
            .map(|&s| generate_set(x, &target, opts, s))
            .collect::<Result<_>>()?
    };

    let mut parts = vec![x];
    parts.extend(sets.iter().map(|s| &s.x));
    let stacked = DataMatrix::vstack(&parts)?;
    let copies = opts.n_sets + 1;

    let mut cratio_max = Vec::new();
    let mut warnings = Vec::new();
    for (i, s) in sets.iter().enumerate() {
        cratio_max.extend(s.cratio_max);
        warnings.extend(s.warnings.iter().map(|&ratio| SetWarning { set: i + 1, ratio }));
    }

    Ok(AugmentedDataset {
        x: stacked,
        response: match target {
            Target::Response(y) => Some(y.repeat(copies)),
            _ => None,
        },
        classes: match target {
            Target::Classes(c) => Some(c.repeat(copies)),
            _ => None,
        },
        meta: AugmentMeta {
            method: opts.method,
            ncomp: opts.ncomp,
            segments: opts.segments,
            n_sets: opts.n_sets,
            seed: opts.seed,
            scheme: opts.scheme,
            standardize: opts.standardize,
            scale_scores: opts.scale_scores,
            per_class: opts.per_class,
            set_seeds,
            cratio_max,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, m: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))).unwrap()
    }

    #[test]
    fn zero_sets_returns_original() {
        let x = data(10, 3, 1);
        let opts = AugmentOptions {
            n_sets: 0,
            ..Default::default()
        };
        let out = augment(&x, Target::None, &opts).unwrap();
        assert_eq!(out.x, x);
        assert!(out.meta.set_seeds.is_empty());
    }

    #[test]
    fn stacks_sets_and_repeats_response() {
        let x = data(12, 4, 2);
        let y: Vec<f64> = (0..12).map(|i| x.get(i, 0) - x.get(i, 2)).collect();
        let opts = AugmentOptions {
            method: Method::Pls,
            n_sets: 3,
            segments: 3,
            ..Default::default()
        };
        let out = augment(&x, Target::Response(&y), &opts).unwrap();
        assert_eq!(out.x.nrows(), 48);
        assert_eq!(out.response.as_ref().unwrap().len(), 48);
        assert_eq!(out.x.select_rows(&(0..12).collect::<Vec<_>>()), x);
        assert_eq!(out.meta.cratio_max.len(), 3);
        assert_eq!(out.meta.set_seeds, derive_seeds(0, 3));
    }

    #[test]
    fn deterministic_and_parallel_agnostic() {
        let x = data(20, 5, 3);
        let mut opts = AugmentOptions {
            n_sets: 4,
            seed: 77,
            ..Default::default()
        };
        let a = augment(&x, Target::None, &opts).unwrap();
        opts.parallel = true;
        let b = augment(&x, Target::None, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn per_class_keeps_class_rows_apart() {
        // two classes far apart; generated rows must stay near their own class
        let mut x = data(24, 3, 4).into_inner();
        let labels: Vec<usize> = (0..24).map(|i| i % 2).collect();
        for i in 0..24 {
            if labels[i] == 1 {
                x.row_mut(i).add_scalar_mut(50.0);
            }
        }
        let x = DataMatrix::new(x).unwrap();
        let opts = AugmentOptions {
            n_sets: 2,
            per_class: true,
            ..Default::default()
        };
        let out = augment(&x, Target::Classes(&labels), &opts).unwrap();
        let classes = out.classes.unwrap();
        for i in 24..72 {
            let mean = out.x.row(i).iter().sum::<f64>() / 3.0;
            assert_eq!(classes[i], usize::from(mean > 25.0));
        }
    }

    #[test]
    fn class_smaller_than_segment_count() {
        let x = data(12, 3, 5);
        let mut labels = vec![0; 12];
        labels[3] = 1;
        labels[8] = 1;
        let opts = AugmentOptions {
            per_class: true,
            ..Default::default()
        };
        let err = augment(&x, Target::Classes(&labels), &opts).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { size: 2, segments: 4, .. }), "{err:?}");
    }

    #[test]
    fn invalid_combinations() {
        let x = data(12, 3, 5);
        let pls = AugmentOptions {
            method: Method::Pls,
            ..Default::default()
        };
        assert!(augment(&x, Target::None, &pls).is_err());
        let three = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2];
        assert!(augment(&x, Target::Classes(&three), &pls).is_err());
        let per_class = AugmentOptions {
            per_class: true,
            ..Default::default()
        };
        assert!(augment(&x, Target::None, &per_class).is_err());
        assert!(matches!(
            augment(&x, Target::Response(&[1.0; 5]), &AugmentOptions::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn binary_classes_drive_pls() {
        let x = data(16, 4, 6);
        let labels: Vec<usize> = (0..16).map(|i| usize::from(x.get(i, 1) > 0.0)).collect();
        let opts = AugmentOptions {
            method: Method::Pls,
            ncomp: 2,
            ..Default::default()
        };
        let out = augment(&x, Target::Classes(&labels), &opts).unwrap();
        assert_eq!(out.classes.unwrap().len(), 32);
    }
}
