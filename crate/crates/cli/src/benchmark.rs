use std::path::PathBuf;

use anyhow::Context;
use pvaug::experiment::{run_experiment, ExperimentConfig};

use crate::{usage, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Experiment JSON; relative paths inside it are resolved against its folder.
    #[arg(long)]
    pub config: PathBuf,
    /// Per-run results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the median summary table to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Run grid cells and repeats on several threads.
    #[arg(long)]
    pub parallel: bool,
}

pub fn run(args: &Args) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(|e| usage("--config", e))?;
    cfg.parallel |= args.parallel;
    let results = run_experiment(&cfg).context("benchmark failed")?;
    results
        .write_csv(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let table = results.summary_table();
    print!("{table}");
    if let Some(path) = &args.summary {
        std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
