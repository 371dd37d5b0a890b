//! Schema-driven encoding of mixed tables.
//!
//! A categorical column with levels `l1..lL` becomes `L-1` indicator columns
//! for `l2..lL`; the first declared level is the reference and encodes as all
//! zeros. Encoded columns follow schema order with dummies expanded in place.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Predictor,
    Response,
    Class,
}

impl Role {
    fn is_predictor(&self) -> bool {
        *self == Role::Predictor
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Role::is_predictor")]
    pub role: Role,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            levels: Vec::new(),
            role: Role::Predictor,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            levels: levels.iter().map(|l| l.to_string()).collect(),
            role: Role::Predictor,
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Number of encoded columns this column contributes as a predictor.
    pub fn width(&self) -> usize {
        match self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => self.levels.len() - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = DatasetSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: DatasetSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SchemaMismatch(msg));
        if self.columns.is_empty() {
            return bad("schema has no columns".into());
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate column {:?}", c.name));
            }
            match c.kind {
                ColumnKind::Numeric if !c.levels.is_empty() => {
                    return bad(format!("numeric column {:?} declares levels", c.name));
                }
                ColumnKind::Categorical => {
                    if c.levels.is_empty() || c.levels.iter().any(|l| l.is_empty()) {
                        return bad(format!("column {:?} needs nonempty levels", c.name));
                    }
                    let unique: HashSet<_> = c.levels.iter().collect();
                    if unique.len() != c.levels.len() {
                        return bad(format!("column {:?} repeats a level", c.name));
                    }
                    if c.levels.len() < 2 && c.role == Role::Predictor {
                        return bad(format!("categorical predictor {:?} needs two levels", c.name));
                    }
                }
                ColumnKind::Numeric => {}
            }
            match (c.role, c.kind) {
                (Role::Response, ColumnKind::Categorical) => {
                    return bad(format!("response {:?} must be numeric", c.name));
                }
                (Role::Class, ColumnKind::Numeric) => {
                    return bad(format!("class column {:?} must be categorical", c.name));
                }
                _ => {}
            }
        }
        let targets = self.columns.iter().filter(|c| c.role != Role::Predictor).count();
        if targets > 1 {
            return bad("at most one response or class column is allowed".into());
        }
        if self.predictors().next().is_none() {
            return bad("schema has no predictor columns".into());
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn predictors(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns.iter().enumerate().filter(|(_, c)| c.role == Role::Predictor)
    }

    /// Index and spec of the response or class column, if any.
    pub fn target(&self) -> Option<(usize, &ColumnSpec)> {
        self.columns.iter().enumerate().find(|(_, c)| c.role != Role::Predictor)
    }

    /// `Σ numeric + Σ (L-1)` over the predictors.
    pub fn encoded_width(&self) -> usize {
        self.predictors().map(|(_, c)| c.width()).sum()
    }

    /// Schema guessed from raw cells: numeric when every cell parses as a
    /// finite number, otherwise categorical with the observed levels sorted.
    pub fn infer(header: &[String], rows: &[Vec<String>]) -> Result<Self> {
        let columns = header
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let numeric = rows.iter().all(|r| parse_number(&r[j]).is_some());
                if numeric {
                    ColumnSpec::numeric(name.clone())
                } else {
                    let mut levels: Vec<String> = rows.iter().map(|r| r[j].clone()).collect();
                    levels.sort();
                    levels.dedup();
                    ColumnSpec {
                        name: name.clone(),
                        kind: ColumnKind::Categorical,
                        levels,
                        role: Role::Predictor,
                    }
                }
            })
            .collect();
        Ok(DatasetSchema { columns })
    }
}

pub(crate) fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            // Display of f64 is the shortest string that parses back exactly
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Row-major table with a header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.header.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric table from a matrix.
    pub fn from_matrix(header: Vec<String>, x: &DataMatrix) -> Self {
        let rows = (0..x.nrows())
            .map(|i| x.row(i).into_iter().map(Cell::Num).collect())
            .collect();
        Table { header, rows }
    }
}

/// Where an encoded column came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    /// Index of the source column in the schema.
    pub source: usize,
    /// Level this indicator stands for; `None` for numeric columns.
    pub level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub schema: DatasetSchema,
    pub columns: Vec<EncodedColumn>,
}

impl ColumnMap {
    pub fn new(schema: &DatasetSchema) -> Self {
        let mut columns = Vec::with_capacity(schema.encoded_width());
        for (j, c) in schema.predictors() {
            match c.kind {
                ColumnKind::Numeric => columns.push(EncodedColumn {
                    name: c.name.clone(),
                    source: j,
                    level: None,
                }),
                ColumnKind::Categorical => columns.extend(c.levels[1..].iter().map(|l| EncodedColumn {
                    name: format!("{}={}", c.name, l),
                    source: j,
                    level: Some(l.clone()),
                })),
            }
        }
        ColumnMap {
            schema: schema.clone(),
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodedTarget {
    None,
    Response(Vec<f64>),
    /// Level index per row, with the level names in declared order.
    Classes { labels: Vec<usize>, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    pub x: DataMatrix,
    pub target: EncodedTarget,
    pub colmap: ColumnMap,
}

impl EncodedTable {
    pub fn target_name(&self) -> Option<&str> {
        self.colmap.schema.target().map(|(_, c)| c.name.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Indicator columns are emitted as they are.
    #[default]
    Continuous,
    /// Each indicator group becomes the level with the largest indicator,
    /// or the reference level when every indicator is below 0.5.
    Rounded,
}

fn cell_text(cell: &Cell) -> String {
    cell.to_string()
}

fn numeric_cell(cell: &Cell, column: &str, row: usize) -> Result<f64> {
    match cell {
        Cell::Num(v) if v.is_finite() => Ok(*v),
        Cell::Num(_) => Err(Error::NonNumericCell {
            column: column.to_string(),
            row,
        }),
        Cell::Text(s) => parse_number(s).ok_or_else(|| Error::NonNumericCell {
            column: column.to_string(),
            row,
        }),
    }
}

fn level_index(spec: &ColumnSpec, cell: &Cell) -> Result<usize> {
    let value = cell_text(cell);
    spec.levels
        .iter()
        .position(|l| *l == value)
        .ok_or_else(|| Error::UnknownLevel {
            column: spec.name.clone(),
            value,
        })
}

pub fn encode(table: &Table, schema: &DatasetSchema) -> Result<EncodedTable> {
    schema.validate()?;
    if table.header != schema.names() {
        return Err(Error::SchemaMismatch(format!(
            "table columns {:?} differ from schema columns {:?}",
            table.header,
            schema.names()
        )));
    }
    let colmap = ColumnMap::new(schema);
    let n = table.nrows();
    let width = colmap.len();
    let mut values = vec![0.0; n * width];
    let mut response = Vec::new();
    let mut labels = Vec::new();

    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != schema.columns.len() {
            return Err(Error::ShapeMismatch(format!("row {i} has {} cells", row.len())));
        }
        let out = &mut values[i * width..(i + 1) * width];
        let mut pos = 0;
        for (j, spec) in schema.columns.iter().enumerate() {
            let cell = &row[j];
            match (spec.role, spec.kind) {
                (Role::Response, _) => response.push(numeric_cell(cell, &spec.name, i)?),
                (Role::Class, _) => labels.push(level_index(spec, cell)?),
                (Role::Predictor, ColumnKind::Numeric) => {
                    out[pos] = numeric_cell(cell, &spec.name, i)?;
                    pos += 1;
                }
                (Role::Predictor, ColumnKind::Categorical) => {
                    let level = level_index(spec, cell)?;
                    if level > 0 {
                        out[pos + level - 1] = 1.0;
                    }
                    pos += spec.levels.len() - 1;
                }
            }
        }
    }

    let x = DataMatrix::from_row_slice(n, width, &values)?;
    let target = match schema.target() {
        None => EncodedTarget::None,
        Some((_, spec)) if spec.role == Role::Response => EncodedTarget::Response(response),
        Some((_, spec)) => EncodedTarget::Classes {
            labels,
            levels: spec.levels.clone(),
        },
    };
    Ok(EncodedTable { x, target, colmap })
}

/// Predictor columns of `x` back in tabular form.
///
/// Continuous mode keeps the encoded header (`name=level` for indicators);
/// rounded mode restores one text column per categorical source column.
pub fn decode(x: &DataMatrix, colmap: &ColumnMap, mode: DecodeMode) -> Result<Table> {
    if x.ncols() != colmap.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} columns for a map of {}",
            x.ncols(),
            colmap.len()
        )));
    }
    if mode == DecodeMode::Continuous {
        return Ok(Table::from_matrix(colmap.names(), x));
    }

    let schema = &colmap.schema;
    let header = schema.predictors().map(|(_, c)| c.name.clone()).collect();
    let rows = (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let mut cells = Vec::new();
            let mut pos = 0;
            for (_, spec) in schema.predictors() {
                match spec.kind {
                    ColumnKind::Numeric => {
                        cells.push(Cell::Num(row[pos]));
                        pos += 1;
                    }
                    ColumnKind::Categorical => {
                        let group = &row[pos..pos + spec.levels.len() - 1];
                        cells.push(Cell::Text(spec.levels[rounded_level(group)].clone()));
                        pos += group.len();
                    }
                }
            }
            cells
        })
        .collect();
    Ok(Table { header, rows })
}

/// Level index for one indicator group: 0 (the reference) when all
/// indicators are below 0.5, else one past the position of the largest.
pub fn rounded_level(group: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in group.iter().enumerate() {
        if v > group[best] {
            best = i;
        }
    }
    if group.iter().all(|&v| v < 0.5) {
        0
    } else {
        best + 1
    }
}
