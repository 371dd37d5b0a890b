//! Loading and encoding of input tables shared by the subcommands.

use std::path::Path;

use anyhow::Context;
use pvaug::io::{read_csv, read_csv_from};
use pvaug::{encode, Cell, ColumnKind, DatasetSchema, EncodedTable, EncodedTarget, Method, Role, Table};

use crate::{usage, Failure};

/// Which target the requested generation needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Nothing,
    /// PLS: a numeric response or a two-level class.
    Response,
    /// Per-class SVD: a class column.
    Classes,
}

impl Need {
    pub fn of(method: Method, per_class: bool) -> Self {
        match (method, per_class) {
            (Method::Pls, _) => Need::Response,
            (Method::Svd, true) => Need::Classes,
            (Method::Svd, false) => Need::Nothing,
        }
    }
}

fn level_names(table: &Table, col: usize) -> Vec<String> {
    let mut levels: Vec<String> = table.rows.iter().map(|r| r[col].to_string()).collect();
    levels.sort();
    levels.dedup();
    levels
}

/// Without a schema the last column is the target whenever one is needed.
fn assign_target(table: &Table, mut schema: DatasetSchema, need: Need) -> DatasetSchema {
    let last = schema.columns.len() - 1;
    match need {
        Need::Nothing => {}
        Need::Response => {
            let col = &mut schema.columns[last];
            col.role = match col.kind {
                ColumnKind::Numeric => Role::Response,
                ColumnKind::Categorical => Role::Class,
            };
        }
        Need::Classes => {
            let levels = level_names(table, last);
            let col = &mut schema.columns[last];
            col.kind = ColumnKind::Categorical;
            col.levels = levels;
            col.role = Role::Class;
        }
    }
    schema
}

pub fn load(data: &Path, schema: Option<&Path>, need: Need) -> Result<EncodedTable, Failure> {
    let (table, schema) = match schema {
        Some(s) => read_csv(data, Some(s)).with_context(|| format!("reading {}", data.display()))?,
        None => {
            let (table, inferred) = read_csv(data, None).with_context(|| format!("reading {}", data.display()))?;
            let schema = assign_target(&table, inferred, need);
            (table, schema)
        }
    };
    let enc = encode(&table, &schema).map_err(|e| usage("--data", e))?;
    match (need, &enc.target) {
        (Need::Nothing, _) => {}
        (Need::Response, EncodedTarget::Response(_)) => {}
        (Need::Response, EncodedTarget::Classes { levels, .. }) if levels.len() == 2 => {}
        (Need::Response, _) => {
            return Err(usage("--method", "pls needs a numeric response or a two-level class column"));
        }
        (Need::Classes, EncodedTarget::Classes { .. }) => {}
        (Need::Classes, _) => return Err(usage("--per-class", "the data has no class column")),
    }
    Ok(enc)
}

/// Reads a generated file with every cell kept as text, then parses the
/// predictor columns.
pub fn read_augmented(path: &Path) -> anyhow::Result<Table> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (table, _) = read_csv_from(file, None).with_context(|| format!("reading {}", path.display()))?;
    Ok(table)
}

pub fn numeric(cell: &Cell) -> Option<f64> {
    match cell {
        Cell::Num(v) => Some(*v),
        Cell::Text(s) => s.parse().ok(),
    }
}
