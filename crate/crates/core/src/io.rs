//! CSV tables, schema files and JSON sidecars.
//!
//! Rows and columns in parse errors are 1-based; row 1 is the first data row
//! after the header.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixed::{parse_number, Cell, ColumnKind, DatasetSchema, Table};

pub fn read_schema(path: &Path) -> Result<DatasetSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetSchema::from_json(&text)
}

pub fn write_schema(path: &Path, schema: &DatasetSchema) -> Result<()> {
    std::fs::write(path, schema.to_json() + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a CSV file, typing its cells with the schema at `schema_path` or
/// with one inferred from the data.
pub fn read_csv(path: &Path, schema_path: Option<&Path>) -> Result<(Table, DatasetSchema)> {
    let schema = schema_path.map(read_schema).transpose()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file, schema)
}

pub fn read_csv_from<R: Read>(reader: R, schema: Option<DatasetSchema>) -> Result<(Table, DatasetSchema)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::ParseError {
            row: 0,
            col: 0,
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::ParseError {
            row: 0,
            col: 0,
            msg: "missing header".into(),
        });
    }

    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError {
            row: i + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        raw.push(rec.iter().map(|c| c.trim().to_string()).collect::<Vec<_>>());
    }
    if raw.is_empty() {
        return Err(Error::ParseError {
            row: 1,
            col: 0,
            msg: "no data rows".into(),
        });
    }

    let schema = match schema {
        Some(s) => {
            s.validate()?;
            if s.names() != header {
                return Err(Error::SchemaMismatch(format!(
                    "header {header:?} differs from schema columns {:?}",
                    s.names()
                )));
            }
            s
        }
        None => DatasetSchema::infer(&header, &raw)?,
    };

    let rows = raw
        .into_iter()
        .enumerate()
        .map(|(i, cells)| {
            cells
                .into_iter()
                .zip(&schema.columns)
                .enumerate()
                .map(|(j, (cell, spec))| match spec.kind {
                    ColumnKind::Numeric => parse_number(&cell).map(Cell::Num).ok_or_else(|| Error::ParseError {
                        row: i + 1,
                        col: j + 1,
                        msg: format!("{cell:?} is not a finite number"),
                    }),
                    ColumnKind::Categorical => Ok(Cell::Text(cell)),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Table { header, rows }, schema))
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv_to(&mut w, table)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Numbers are written in their shortest round-trip form.
pub fn write_csv_to<W: Write>(writer: W, table: &Table) -> Result<()> {
    for row in &table.rows {
        if let Some(j) = row.iter().position(|c| matches!(c, Cell::Num(v) if !v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value in column {:?}",
                table.header.get(j).map_or("", |s| s.as_str())
            )));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `data.csv` -> `data.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sidecar<T: Serialize>(csv_path: &Path, meta: &T) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(meta)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_sidecar<T: DeserializeOwned>(csv_path: &Path) -> Result<T> {
    let path = sidecar_path(csv_path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
