//! CSV ingestion and CSV/JSON result writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::trace::RunTrace;

/// Column treated as ground-truth labels when reading a dataset.
pub const LABEL_COLUMN: &str = "label";

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        kind => {
            let message = match line {
                Some(l) => format!("line {l}: {kind:?}"),
                None => format!("{kind:?}"),
            };
            format_error(path, message)
        }
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_label(path: &Path, line: u64, cell: &str) -> Result<usize> {
    cell.parse::<usize>().map_err(|_| {
        format_error(
            path,
            format!("line {line}: label '{cell}' is not a non-negative integer"),
        )
    })
}

/// Reads a headed CSV of numeric columns. A column named `label`, if
/// present, is returned separately as integer labels.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Dataset, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_col = headers.iter().position(|h| h == LABEL_COLUMN);
    let dim = headers.len() - usize::from(label_col.is_some());
    if dim == 0 {
        return Err(format_error(path, "no feature columns"));
    }

    let mut values = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_col {
                labels
                    .as_mut()
                    .expect("label column")
                    .push(parse_label(path, line, cell)?);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| format_error(path, format!("line {line}: '{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(format_error(path, format!("line {line}: non-finite value '{cell}'")));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(format_error(path, "no rows"));
    }
    Ok((Dataset::new(dim, values)?, labels))
}

/// Reads an `index,label` CSV; rows must list indices `0..n` in order.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| format_error(path, "missing 'label' column"))?;
    let index_col = headers.iter().position(|h| h == "index");
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if let Some(ic) = index_col {
            let index = record.get(ic).unwrap_or_default();
            if index.parse::<usize>().ok() != Some(labels.len()) {
                return Err(format_error(
                    path,
                    format!("line {line}: expected index {}", labels.len()),
                ));
            }
        }
        labels.push(parse_label(path, line, record.get(col).unwrap_or_default())?);
    }
    if labels.is_empty() {
        return Err(format_error(path, "no rows"));
    }
    Ok(labels)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

/// Writes features as `x0..x{d-1}`, plus a `label` column when given.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset, labels: Option<&[usize]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(l) = labels {
        if l.len() != data.len() {
            return Err(Error::LengthMismatch {
                left: l.len(),
                right: data.len(),
            });
        }
    }
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        let header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
        write!(out, "{}", header.join(","))?;
        if labels.is_some() {
            write!(out, ",{LABEL_COLUMN}")?;
        }
        writeln!(out)?;
        for (i, row) in data.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    write!(out, ",")?;
                }
                // shortest representation that parses back to the same f64
                write!(out, "{v}")?;
            }
            if let Some(l) = labels {
                write!(out, ",{}", l[i])?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| io_error(path, e))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "index,{LABEL_COLUMN}")?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        out.flush()
    };
    write().map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| format_error(path, e.to_string()))?;
    writeln!(out).and_then(|()| out.flush()).map_err(|e| io_error(path, e))
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &Metrics) -> Result<()> {
    write_json(path, metrics)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &RunTrace) -> Result<()> {
    write_json(path, trace)
}
