use std::path::PathBuf;

use pvaug::io::{write_csv, write_sidecar};
use pvaug::{augment, AugmentMeta, AugmentOptions, Cell, EncodedTarget, Error, Method, Table, Target};
use serde::{Deserialize, Serialize};

use crate::data::{self, Need};
use crate::{usage, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON; inferred from the data when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value = "svd")]
    pub method: Method,
    /// Number of latent variables (A).
    #[arg(long)]
    pub nlv: usize,
    /// Number of cross-validation segments (K).
    #[arg(long, default_value_t = 4)]
    pub nseg: usize,
    /// Number of PV-sets to append.
    #[arg(long, default_value_t = 1)]
    pub nsets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale predictors to unit variance before modelling.
    #[arg(long)]
    pub standardize: bool,
    /// Rescale local scores by the ratio of global to local singular values (SVD).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub scale_scores: bool,
    /// Generate separately within each class (SVD only).
    #[arg(long)]
    pub per_class: bool,
    /// Output CSV; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Generate sets on several threads (output is identical).
    #[arg(long)]
    pub parallel: bool,
}

/// Contents of the JSON file written next to a generated CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub data: String,
    pub schema: Option<String>,
    #[serde(flatten)]
    pub meta: AugmentMeta,
    pub rows: usize,
    pub original_rows: usize,
    pub columns: Vec<String>,
}

/// Maps engine errors caused by argument values onto those arguments.
pub fn engine_failure(e: Error) -> Failure {
    match e {
        Error::BadSegmentCount { .. } | Error::ClassTooSmall { .. } => usage("--nseg", e),
        Error::RankDeficient(_) | Error::SegmentRankDeficient(_) => usage("--nlv", e),
        Error::InvalidParameter(_) => usage("arguments", e),
        e => Failure::Runtime(e.into()),
    }
}

pub fn check_common(method: Method, nlv: usize, nseg: usize, per_class: bool, rows: usize, cols: usize) -> Result<(), Failure> {
    if method == Method::Pls && per_class {
        return Err(usage("--per-class", "only available with --method svd"));
    }
    if nseg < 2 || nseg > rows {
        return Err(usage("--nseg", Error::BadSegmentCount { segments: nseg, rows }));
    }
    if nlv == 0 || nlv > cols {
        return Err(usage("--nlv", format!("must be between 1 and the {cols} predictor columns")));
    }
    Ok(())
}

pub fn run(args: &Args) -> Result<(), Failure> {
    let enc = data::load(&args.data, args.schema.as_deref(), Need::of(args.method, args.per_class))?;
    check_common(args.method, args.nlv, args.nseg, args.per_class, enc.x.nrows(), enc.x.ncols())?;

    let opts = AugmentOptions {
        method: args.method,
        ncomp: args.nlv,
        segments: args.nseg,
        n_sets: args.nsets,
        seed: args.seed,
        standardize: args.standardize,
        scale_scores: args.scale_scores,
        per_class: args.per_class,
        parallel: args.parallel,
        ..Default::default()
    };
    let target = match (&enc.target, args.method, args.per_class) {
        (EncodedTarget::Response(y), Method::Pls, _) => Target::Response(y),
        (EncodedTarget::Classes { labels, .. }, Method::Pls, _) | (EncodedTarget::Classes { labels, .. }, _, true) => {
            Target::Classes(labels)
        }
        _ => Target::None,
    };
    let out = augment(&enc.x, target, &opts).map_err(engine_failure)?;

    for w in &out.meta.warnings {
        eprintln!(
            "warning: set {} segment {} component {}: c-ratio {:.3} exceeds {}",
            w.set, w.ratio.segment, w.ratio.component, w.ratio.ratio, opts.cratio_max
        );
    }

    let mut table = Table::from_matrix(enc.colmap.names(), &out.x);
    if let Some(name) = enc.target_name() {
        table.header.push(name.to_string());
        let cells: Vec<Cell> = match (&enc.target, &out.response, &out.classes) {
            (_, Some(y), _) => y.iter().map(|&v| Cell::Num(v)).collect(),
            (EncodedTarget::Classes { levels, .. }, _, Some(c)) => {
                c.iter().map(|&l| Cell::Text(levels[l].clone())).collect()
            }
            // the class column is carried along even when generation ignores it
            (EncodedTarget::Classes { labels, levels }, _, None) => (0..=opts.n_sets)
                .flat_map(|_| labels.iter().map(|&l| Cell::Text(levels[l].clone())))
                .collect(),
            (EncodedTarget::Response(y), _, _) => y.repeat(opts.n_sets + 1).into_iter().map(Cell::Num).collect(),
            (EncodedTarget::None, _, _) => Vec::new(),
        };
        for (row, cell) in table.rows.iter_mut().zip(cells) {
            row.push(cell);
        }
    }
    write_csv(&args.out, &table).map_err(|e| Failure::Runtime(e.into()))?;

    let sidecar = Sidecar {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: std::env::args().skip(1).collect(),
        data: args.data.display().to_string(),
        schema: args.schema.as_ref().map(|p| p.display().to_string()),
        rows: out.x.nrows(),
        original_rows: enc.x.nrows(),
        columns: table.header.clone(),
        meta: out.meta,
    };
    let path = write_sidecar(&args.out, &sidecar).map_err(|e| Failure::Runtime(e.into()))?;
    println!(
        "wrote {} rows ({} original + {} PV-sets) to {} and metadata to {}",
        sidecar.rows,
        sidecar.original_rows,
        opts.n_sets,
        args.out.display(),
        path.display()
    );
    Ok(())
}
