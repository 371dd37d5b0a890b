//! Benchmark harness: train networks on original and PV-augmented training
//! sets and score them on held-out rows.
//!
//! Each repeat draws its own split (unless a fixed test file is given) and
//! its own network initialization; every augmented cell of the grid draws its
//! own PV-sets. A baseline cell without augmentation is always run.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{augment, AugmentOptions, Method, Target};
use crate::error::{Error, Result};
use crate::io::read_csv;
use crate::matrix::{DataMatrix, Preprocessor};
use crate::mixed::{encode, EncodedTable, EncodedTarget};
use crate::mlp::{evaluate, mlp_train, Loss, MlpSpec};
use crate::resampling::{derive_seeds, rng, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

fn default_train_fraction() -> f64 {
    0.75
}
fn default_true() -> bool {
    true
}
fn default_epochs() -> usize {
    300
}
fn default_batch() -> usize {
    10
}
fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label written to the results.
    pub dataset: String,
    pub task: Task,
    /// Training rows, or all rows when `test_data` is absent.
    pub data: PathBuf,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Fixed test rows; without it every repeat splits `data` anew
    /// (stratified by class for classification).
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub method: Method,
    #[serde(default)]
    pub per_class: bool,
    /// Generate PV-sets from standardized training data instead of
    /// mean-centered data.
    #[serde(default)]
    pub standardize_before_generation: bool,
    #[serde(default = "default_true")]
    pub scale_scores: bool,
    pub n_sets: Vec<usize>,
    pub ncomp: Vec<usize>,
    pub segments: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Hidden layer widths; defaults to the regression or classification
    /// network of the task.
    #[serde(default)]
    pub hidden: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub parallel: bool,
}

impl ExperimentConfig {
    /// Reads a JSON config; relative paths are taken relative to its folder.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data);
        cfg.schema.as_mut().map(resolve);
        cfg.test_data.as_mut().map(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.n_sets.iter().any(|&n| n > 0) && (self.ncomp.is_empty() || self.segments.is_empty()) {
            return bad("augmented cells need at least one ncomp and one segments value");
        }
        if self.ncomp.contains(&0) {
            return bad("ncomp values must be positive");
        }
        if self.segments.iter().any(|&k| k < 2) {
            return bad("segments values must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.per_class && (self.method != Method::Svd || self.task != Task::Classification) {
            return bad("per_class needs method svd and a classification task");
        }
        Ok(())
    }

    fn hidden(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| match self.task {
            Task::Regression => vec![150, 200, 150, 100, 50],
            Task::Classification => vec![34, 68, 68, 68, 34],
        })
    }

    fn method_label(&self) -> &'static str {
        match (self.method, self.per_class) {
            (Method::Pls, _) => "pls",
            (Method::Svd, false) => "svd",
            (Method::Svd, true) => "svd-class",
        }
    }
}

/// One grid cell; `n_sets == 0` is the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub n_sets: usize,
    pub ncomp: usize,
    pub segments: usize,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n_sets={} A={} K={}", self.n_sets, self.ncomp, self.segments)
    }
}

pub fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = vec![Cell {
        n_sets: 0,
        ncomp: 0,
        segments: 0,
    }];
    let mut sets: Vec<usize> = cfg.n_sets.iter().copied().filter(|&n| n > 0).collect();
    sets.sort_unstable();
    sets.dedup();
    for &n_sets in &sets {
        for &ncomp in &cfg.ncomp {
            for &segments in &cfg.segments {
                cells.push(Cell {
                    n_sets,
                    ncomp,
                    segments,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub n_sets: usize,
    #[serde(rename = "A")]
    pub ncomp: usize,
    #[serde(rename = "K")]
    pub segments: usize,
    pub lr: f64,
    pub repeat: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub n_sets: usize,
    pub ncomp: usize,
    pub segments: usize,
    pub metric: String,
    pub median: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub dataset: String,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ExperimentResults {
    fn new(dataset: String, records: Vec<RunRecord>) -> Self {
        let mut summary: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
        for r in &records {
            let key = |s: &SummaryRow| {
                s.method == r.method
                    && s.n_sets == r.n_sets
                    && s.ncomp == r.ncomp
                    && s.segments == r.segments
                    && s.metric == r.metric
            };
            match summary.iter_mut().find(|(s, _)| key(s)) {
                Some((_, values)) => values.push(r.value),
                None => summary.push((
                    SummaryRow {
                        method: r.method.clone(),
                        n_sets: r.n_sets,
                        ncomp: r.ncomp,
                        segments: r.segments,
                        metric: r.metric.clone(),
                        median: 0.0,
                        runs: 0,
                    },
                    vec![r.value],
                )),
            }
        }
        let summary = summary
            .into_iter()
            .map(|(mut s, values)| {
                s.median = median(&values);
                s.runs = values.len();
                s
            })
            .collect();
        ExperimentResults {
            dataset,
            records,
            summary,
        }
    }

    /// Median of `metric` for the given method label and number of sets.
    pub fn median_of(&self, method: &str, n_sets: usize, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.n_sets == n_sets && s.metric == metric)
            .map(|s| s.median)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:<10} {:>6} {:>4} {:>4} {:<9} {:>12} {:>5}\n",
            "dataset", "method", "n_sets", "A", "K", "metric", "median", "runs"
        );
        for s in &self.summary {
            out += &format!(
                "{:<10} {:<10} {:>6} {:>4} {:>4} {:<9} {:>12.6} {:>5}\n",
                self.dataset, s.method, s.n_sets, s.ncomp, s.segments, s.metric, s.median, s.runs
            );
        }
        out
    }
}

struct Prepared {
    x: DataMatrix,
    /// Response values or 0/1 labels.
    y: Vec<f64>,
    labels: Option<Vec<usize>>,
}

fn prepare(table: &EncodedTable, task: Task) -> Result<Prepared> {
    match (&table.target, task) {
        (EncodedTarget::Response(y), Task::Regression) => Ok(Prepared {
            x: table.x.clone(),
            y: y.clone(),
            labels: None,
        }),
        (EncodedTarget::Classes { labels, levels }, Task::Classification) if levels.len() == 2 => Ok(Prepared {
            x: table.x.clone(),
            y: labels.iter().map(|&l| l as f64).collect(),
            labels: Some(labels.clone()),
        }),
        _ => Err(Error::SchemaMismatch(format!(
            "a {task:?} experiment needs a {} column",
            match task {
                Task::Regression => "response",
                Task::Classification => "two-level class",
            }
        ))),
    }
}

fn load(path: &Path, schema: Option<&Path>, task: Task) -> Result<Prepared> {
    let (table, schema) = read_csv(path, schema)?;
    prepare(&encode(&table, &schema)?, task)
}

fn subset(p: &Prepared, rows: &[usize]) -> Prepared {
    Prepared {
        x: p.x.select_rows(rows),
        y: rows.iter().map(|&i| p.y[i]).collect(),
        labels: p.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
    }
}

/// Training rows drawn per class (or overall) with `round(fraction * n)`.
fn split_rows(p: &Prepared, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n = p.x.nrows();
    let groups: Vec<Vec<usize>> = match &p.labels {
        Some(labels) => {
            let nclass = labels.iter().max().map_or(0, |m| m + 1);
            (0..nclass)
                .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
                .collect()
        }
        None => vec![(0..n).collect()],
    };
    let mut r = rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(&mut r);
        let k = (fraction * g.len() as f64).round() as usize;
        train.extend_from_slice(&g[..k]);
        test.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

struct RunSeeds {
    split: u64,
    init: u64,
    pv: u64,
}

fn run_one(
    cfg: &ExperimentConfig,
    train: &Prepared,
    test: &Prepared,
    cell: Cell,
    seeds: &RunSeeds,
) -> Result<Vec<(String, f64)>> {
    let pre = Preprocessor::fit(train.x.as_matrix(), true)?;
    let gen_x = if cfg.standardize_before_generation {
        DataMatrix::new(pre.apply(train.x.as_matrix()))?
    } else {
        train.x.clone()
    };

    let (x_aug, y_aug) = if cell.n_sets == 0 {
        (gen_x, train.y.clone())
    } else {
        let opts = AugmentOptions {
            method: cfg.method,
            ncomp: cell.ncomp,
            segments: cell.segments,
            n_sets: cell.n_sets,
            seed: seeds.pv,
            scheme: Scheme::Random,
            standardize: false,
            scale_scores: cfg.scale_scores,
            per_class: cfg.per_class,
            parallel: false,
            ..Default::default()
        };
        let target = match &train.labels {
            Some(l) => Target::Classes(l),
            None => Target::Response(&train.y),
        };
        let aug = augment(&gen_x, target, &opts)?;
        let y = match (aug.response, aug.classes) {
            (Some(y), _) => y,
            (None, Some(c)) => c.into_iter().map(|l| l as f64).collect(),
            (None, None) => unreachable!("target given"),
        };
        (aug.x, y)
    };
    let x_aug = if cfg.standardize_before_generation {
        x_aug.into_inner()
    } else {
        pre.apply(x_aug.as_matrix())
    };
    let x_test: DMatrix<f64> = pre.apply(test.x.as_matrix());

    let loss = match cfg.task {
        Task::Regression => Loss::Mse,
        Task::Classification => Loss::Bce,
    };
    // the response is centered only
    let offset = match cfg.task {
        Task::Regression => train.y.iter().sum::<f64>() / train.y.len() as f64,
        Task::Classification => 0.0,
    };
    let y_fit: Vec<f64> = y_aug.iter().map(|v| v - offset).collect();
    let mut spec = MlpSpec::feed_forward(x_aug.ncols(), &cfg.hidden(), loss);
    spec.learning_rate = cfg.learning_rate;
    spec.epochs = cfg.epochs;
    spec.batch_size = cfg.batch_size;
    spec.seed = seeds.init;
    let trained = mlp_train(&spec, &x_aug, &y_fit)?;
    let m = evaluate(&trained.model, &x_test, &test.y, offset)?;

    let mut out = Vec::new();
    if let Some(v) = m.rmsep {
        out.push(("rmsep".to_string(), v));
    }
    if let Some(v) = m.r2 {
        out.push(("r2".to_string(), v));
    }
    if let Some(v) = m.accuracy {
        out.push(("accuracy".to_string(), v));
    }
    out.push(("train_loss".to_string(), *trained.losses.last().unwrap_or(&f64::NAN)));
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let data = load(&cfg.data, cfg.schema.as_deref(), cfg.task)?;
    let fixed_test = cfg
        .test_data
        .as_deref()
        .map(|p| load(p, cfg.schema.as_deref(), cfg.task))
        .transpose()?;

    let cells = grid(cfg);
    let repeat_seeds = derive_seeds(cfg.seed, cfg.repeats);
    let mut jobs = Vec::new();
    for (repeat, &rs) in repeat_seeds.iter().enumerate() {
        // split and initialization are shared by the cells of a repeat
        let s = derive_seeds(rs, 2 + cells.len());
        for (c, &cell) in cells.iter().enumerate() {
            jobs.push((
                repeat,
                cell,
                RunSeeds {
                    split: s[0],
                    init: s[1],
                    pv: s[2 + c],
                },
            ));
        }
    }

    let run = |(repeat, cell, seeds): &(usize, Cell, RunSeeds)| -> Result<Vec<RunRecord>> {
        let drawn;
        let (train, test) = match &fixed_test {
            Some(t) => (&data, t),
            None => {
                let (tr, te) = split_rows(&data, cfg.train_fraction, seeds.split);
                drawn = (subset(&data, &tr), subset(&data, &te));
                (&drawn.0, &drawn.1)
            }
        };
        let metrics = run_one(cfg, train, test, *cell, seeds).map_err(|e| Error::RunFailed {
            cell: format!("{cell} repeat={}", repeat + 1),
            source: Box::new(e),
        })?;
        log::info!("{} {} repeat {} done", cfg.dataset, cell, repeat + 1);
        let method = if cell.n_sets == 0 { "none" } else { cfg.method_label() };
        Ok(metrics
            .into_iter()
            .map(|(metric, value)| RunRecord {
                dataset: cfg.dataset.clone(),
                method: method.to_string(),
                n_sets: cell.n_sets,
                ncomp: cell.ncomp,
                segments: cell.segments,
                lr: cfg.learning_rate,
                repeat: repeat + 1,
                metric,
                value,
            })
            .collect())
    };

    let per_run: Vec<Vec<RunRecord>> = if cfg.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let mut records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.n_sets, a.ncomp, a.segments, a.repeat)
            .cmp(&(b.n_sets, b.ncomp, b.segments, b.repeat))
    });
    Ok(ExperimentResults::new(cfg.dataset.clone(), records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{write_csv, write_schema};
    use crate::mixed::{Cell as TableCell, ColumnSpec, DatasetSchema, Role, Table};
    use rand_distr::{Distribution, StandardNormal};

    fn regression_files(dir: &Path) -> (PathBuf, PathBuf) {
        let mut r = rng(5);
        let mut g = || -> f64 { StandardNormal.sample(&mut r) };
        let rows: Vec<Vec<TableCell>> = (0..40)
            .map(|_| {
                let a = g();
                let b = g();
                let xs = [a, b, a + b + 0.01 * g(), a - b + 0.01 * g()];
                let mut row: Vec<TableCell> = xs.iter().map(|&v| TableCell::Num(v)).collect();
                row.push(TableCell::Num(3.0 * a - b + 0.05 * g()));
                row
            })
            .collect();
        let header: Vec<String> = ["a", "b", "c", "d", "y"].iter().map(|s| s.to_string()).collect();
        let data = dir.join("reg.csv");
        write_csv(&data, &Table { header, rows }).unwrap();
        let mut cols: Vec<ColumnSpec> = ["a", "b", "c", "d"].iter().map(|n| ColumnSpec::numeric(*n)).collect();
        cols.push(ColumnSpec::numeric("y").with_role(Role::Response));
        let schema = dir.join("reg.schema.json");
        write_schema(&schema, &DatasetSchema::new(cols).unwrap()).unwrap();
        (data, schema)
    }

    fn small_config(data: PathBuf, schema: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            dataset: "toy".into(),
            task: Task::Regression,
            data,
            schema: Some(schema),
            test_data: None,
            train_fraction: 0.75,
            method: Method::Pls,
            per_class: false,
            standardize_before_generation: false,
            scale_scores: true,
            n_sets: vec![1, 5],
            ncomp: vec![2],
            segments: vec![4],
            repeats: 2,
            learning_rate: 1e-3,
            epochs: 3,
            batch_size: 10,
            hidden: Some(vec![4]),
            seed: 1,
            parallel: false,
        }
    }

    #[test]
    fn grid_bookkeeping() {
        let dir = tempfile::tempdir().unwrap();
        let (data, schema) = regression_files(dir.path());
        let cfg = small_config(data, schema);
        let res = run_experiment(&cfg).unwrap();
        let rmsep: Vec<&RunRecord> = res.records.iter().filter(|r| r.metric == "rmsep").collect();
        assert_eq!(rmsep.len(), 6);
        assert_eq!(rmsep.iter().filter(|r| r.n_sets > 0).count(), 4);
        assert!(rmsep.iter().filter(|r| r.n_sets == 0).all(|r| r.method == "none"));
        assert!(res.median_of("pls", 5, "rmsep").is_some());

        let out = dir.path().join("results.csv");
        res.write_csv(&out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("dataset,method,n_sets,A,K,lr,repeat,metric,value\n"));
        assert!(res.summary_table().contains("rmsep"));
    }

    #[test]
    fn parallel_matches_sequential() {
        let dir = tempfile::tempdir().unwrap();
        let (data, schema) = regression_files(dir.path());
        let mut cfg = small_config(data, schema);
        let a = run_experiment(&cfg).unwrap();
        cfg.parallel = true;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn stratified_split_sizes() {
        let labels: Vec<usize> = (0..292).map(|i| usize::from(i >= 159)).collect();
        let p = Prepared {
            x: DataMatrix::new(DMatrix::zeros(292, 1)).unwrap(),
            y: labels.iter().map(|&l| l as f64).collect(),
            labels: Some(labels.clone()),
        };
        let (train, test) = split_rows(&p, 0.75, 3);
        assert_eq!(train.len(), 119 + 100);
        assert_eq!(test.len(), 73);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 0).count(), 119);
    }

    #[test]
    fn config_checks() {
        let dir = tempfile::tempdir().unwrap();
        let (data, schema) = regression_files(dir.path());
        let mut cfg = small_config(data, schema);
        cfg.repeats = 0;
        assert!(cfg.validate().is_err());
        cfg.repeats = 1;
        cfg.per_class = true;
        assert!(cfg.validate().is_err());
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"dataset\": 1}").unwrap();
        assert!(ExperimentConfig::from_file(&path).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
