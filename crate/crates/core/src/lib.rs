//! Data augmentation for collinear tabular data with Procrustes
//! validation sets.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod io;
pub mod matrix;
pub mod mixed;
pub mod mlp;
pub mod resampling;

pub use diagnostics::{check_rules_pls, check_rules_svd, covariance_summary, CovarianceSummary, Rule, RuleCheck, RuleReport};
pub use engine::{
    augment, generate_pv_pls, generate_pv_svd, simpls, AugmentMeta, AugmentOptions, AugmentedDataset, CRatioReport,
    CRatioWarning, GenerateOptions, Method, PlsComponents, PvMeta, PvModelPls, PvModelSvd, PvSet, Target,
};
pub use error::{Error, Result};
pub use mixed::{decode, encode, Cell, ColumnKind, ColumnMap, ColumnSpec, DatasetSchema, DecodeMode, EncodedTable, EncodedTarget, Role, Table};
pub use matrix::{distances, svd_truncated, DataMatrix, DistancePair, Preprocessor, SvdBasis};
pub use resampling::{derive_seeds, make_splits, Scheme, SegmentPlan};
