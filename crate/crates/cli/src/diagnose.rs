use std::path::PathBuf;

use anyhow::Context;
use pvaug::{
    check_rules_pls, check_rules_svd, covariance_summary, derive_seeds, make_splits, CovarianceSummary, DataMatrix,
    EncodedTarget, Method, RuleReport, Scheme, SegmentPlan,
};
use serde::{Deserialize, Serialize};

use crate::data::{self, Need};
use crate::generate::{check_common, engine_failure};
use crate::{usage, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Original CSV the PV-sets were generated from.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output of `generate`: the original rows followed by the PV-sets.
    #[arg(long)]
    pub pvset: PathBuf,
    #[arg(long, default_value = "svd")]
    pub method: Method,
    #[arg(long)]
    pub nlv: usize,
    #[arg(long, default_value_t = 4)]
    pub nseg: usize,
    /// Seed given to `generate`; the segment plans are rebuilt from it.
    #[arg(long, conflicts_with = "plan")]
    pub seed: Option<u64>,
    /// JSON file with one segment plan per PV-set (or a single plan).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub scale_scores: bool,
    #[arg(long)]
    pub per_class: bool,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SetReport {
    set: usize,
    pass: bool,
    max_rel_dev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cratio_max: Option<f64>,
    covariance: CovarianceSummary,
}

#[derive(Debug, Serialize)]
struct Report {
    method: Method,
    ncomp: usize,
    segments: usize,
    #[serde(flatten)]
    overall: RuleReport,
    sets: Vec<SetReport>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlanFile {
    One(SegmentPlan),
    Many(Vec<SegmentPlan>),
}

fn load_plans(args: &Args, n_sets: usize, rows: usize) -> Result<Vec<SegmentPlan>, Failure> {
    match (&args.plan, args.seed) {
        (None, None) => Err(usage("--seed", "either --seed or --plan is required")),
        (Some(_), _) if args.per_class => Err(usage("--plan", "per-class checks rebuild plans from --seed")),
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let plans = match serde_json::from_str(&text).map_err(|e| usage("--plan", e))? {
                PlanFile::One(p) => vec![p],
                PlanFile::Many(v) => v,
            };
            if plans.len() != n_sets {
                return Err(usage("--plan", format!("{} plans for {n_sets} PV-sets", plans.len())));
            }
            for p in &plans {
                p.validate(rows).map_err(|e| usage("--plan", e))?;
                if p.segments != args.nseg {
                    return Err(usage("--plan", format!("plan has {} segments, --nseg is {}", p.segments, args.nseg)));
                }
            }
            Ok(plans)
        }
        // per-class plans are built inside the class loop
        (None, Some(_)) if args.per_class => Ok(Vec::new()),
        (None, Some(seed)) => derive_seeds(seed, n_sets)
            .into_iter()
            .map(|s| make_splits(rows, args.nseg, s, Scheme::Random).map_err(engine_failure))
            .collect(),
    }
}

fn pv_blocks(args: &Args, names: &[String], rows: usize) -> Result<Vec<DataMatrix>, Failure> {
    let table = data::read_augmented(&args.pvset)?;
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            table
                .column_index(n)
                .ok_or_else(|| usage("--pvset", format!("column {n:?} is missing")))
        })
        .collect::<Result<_, _>>()?;
    let total = table.nrows();
    if total < 2 * rows || total % rows != 0 {
        return Err(usage(
            "--pvset",
            format!("{total} rows is not the {rows} original rows followed by whole PV-sets"),
        ));
    }
    let mut values = Vec::with_capacity(total * idx.len());
    for (i, row) in table.rows.iter().enumerate() {
        for (name, &j) in names.iter().zip(&idx) {
            let v = data::numeric(&row[j])
                .ok_or_else(|| usage("--pvset", format!("non-numeric value in column {name:?} at row {}", i + 1)))?;
            values.push(v);
        }
    }
    let all = DataMatrix::from_row_slice(total, idx.len(), &values).map_err(|e| usage("--pvset", e))?;
    Ok((1..total / rows)
        .map(|s| all.select_rows(&(s * rows..(s + 1) * rows).collect::<Vec<_>>()))
        .collect())
}

pub fn run(args: &Args) -> Result<(), Failure> {
    let enc = data::load(&args.data, args.schema.as_deref(), Need::of(args.method, args.per_class))?;
    let (rows, cols) = (enc.x.nrows(), enc.x.ncols());
    check_common(args.method, args.nlv, args.nseg, args.per_class, rows, cols)?;
    if args.plan.is_none() && args.seed.is_none() {
        return Err(usage("--seed", "either --seed or --plan is required"));
    }
    let sets = pv_blocks(args, &enc.colmap.names(), rows)?;
    let plans = load_plans(args, sets.len(), rows)?;

    let mut set_reports = Vec::new();
    let mut rule_reports = Vec::new();
    for (s, xpv) in sets.iter().enumerate() {
        let report = match (args.method, &enc.target) {
            (Method::Pls, target) => {
                let y: Vec<f64> = match target {
                    EncodedTarget::Response(y) => y.clone(),
                    EncodedTarget::Classes { labels, .. } => labels.iter().map(|&l| l as f64).collect(),
                    EncodedTarget::None => unreachable!("checked when loading"),
                };
                check_rules_pls(&enc.x, &y, xpv, &plans[s], args.nlv, args.standardize).map_err(engine_failure)?
            }
            (Method::Svd, EncodedTarget::Classes { labels, .. }) if args.per_class => {
                let set_seed = derive_seeds(args.seed.expect("checked above"), sets.len())[s];
                let nclass = labels.iter().max().map_or(0, |m| m + 1);
                let mut parts = Vec::new();
                for (class, class_seed) in derive_seeds(set_seed, nclass).into_iter().enumerate() {
                    let members: Vec<usize> = (0..rows).filter(|&i| labels[i] == class).collect();
                    if members.is_empty() {
                        continue;
                    }
                    let plan =
                        make_splits(members.len(), args.nseg, class_seed, Scheme::Random).map_err(engine_failure)?;
                    parts.push(
                        check_rules_svd(
                            &enc.x.select_rows(&members),
                            &xpv.select_rows(&members),
                            &plan,
                            args.nlv,
                            args.standardize,
                            args.scale_scores,
                        )
                        .map_err(engine_failure)?,
                    );
                }
                RuleReport::merge(&parts)
            }
            (Method::Svd, _) => {
                check_rules_svd(&enc.x, xpv, &plans[s], args.nlv, args.standardize, args.scale_scores)
                    .map_err(engine_failure)?
            }
        };
        let covariance = covariance_summary(&enc.x, xpv).map_err(|e| Failure::Runtime(e.into()))?;
        set_reports.push(SetReport {
            set: s + 1,
            pass: report.pass,
            max_rel_dev: report.max_rel_dev(),
            cratio_max: report.cratio_max,
            covariance,
        });
        rule_reports.push(report);
    }

    let overall = RuleReport::merge(&rule_reports);
    println!("{:<6} {:>9} {:>14}  result", "rule", "component", "max_rel_dev");
    for r in &overall.rules {
        let rule = serde_json::to_value(r.rule).expect("rule serializes");
        println!(
            "{:<6} {:>9} {:>14.3e}  {}",
            rule.as_str().unwrap_or_default(),
            r.component,
            r.max_rel_dev,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(c) = overall.cratio_max {
        println!("largest c-ratio: {c:.4}");
    }
    for s in &set_reports {
        println!(
            "set {:>3}: {}  covariance distance {:.4}",
            s.set,
            if s.pass { "pass" } else { "FAIL" },
            s.covariance.frobenius_rel_distance
        );
    }
    println!(
        "{} PV-set(s) checked at tolerance {:e}: {}",
        set_reports.len(),
        overall.tolerance,
        if overall.pass { "all rules hold" } else { "rules violated" }
    );

    let pass = overall.pass;
    if let Some(path) = &args.report {
        let report = Report {
            method: args.method,
            ncomp: args.nlv,
            segments: args.nseg,
            overall,
            sets: set_reports,
        };
        let text = serde_json::to_string_pretty(&report).context("serializing report")?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Rules)
    }
}
