use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use super::Dataset;
use crate::error::{Error, Result};

/// Which CSV column carries ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    /// The last column of every row.
    Last,
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

/// Loads a comma-separated file. A header row is detected when any field of
/// the first row does not parse as a number.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&LabelColumn>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_path(path).map_err(csv_err)?;

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { row, column: 0, message: e.to_string() })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let header: Option<Vec<String>> = if records[0].iter().any(|f| f.parse::<f64>().is_err()) {
        Some(records.remove(0).iter().map(str::to_string).collect())
    } else {
        None
    };
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let width = records[0].len();
    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Last) => Some(width - 1),
        Some(LabelColumn::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| Error::Csv {
                row: 0,
                column: 0,
                message: format!("label column {name:?} requested but the file has no header"),
            })?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| Error::Csv {
                row: 0,
                column: 0,
                message: format!("no column named {name:?}"),
            })?)
        }
    };
    if let Some(i) = label_idx {
        if i >= width {
            return Err(Error::Csv { row: 0, column: i, message: format!("label column out of range (row has {width} fields)") });
        }
    }

    let first_data_row = usize::from(header.is_some());
    let mut rows = Vec::with_capacity(records.len());
    let mut raw_labels = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        let row = r + first_data_row;
        if rec.len() != width {
            return Err(Error::Csv { row, column: rec.len().min(width), message: format!("expected {width} fields, found {}", rec.len()) });
        }
        let mut point = Vec::with_capacity(width);
        for (c, field) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Csv { row, column: c, message: format!("non-numeric feature {field:?}") })?;
            if !v.is_finite() {
                return Err(Error::Csv { row, column: c, message: format!("non-finite feature {field:?}") });
            }
            point.push(v);
        }
        rows.push(point);
    }

    let labels = label_idx.map(|_| encode_labels(&raw_labels));
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::from_rows(name, &rows, labels)
}

/// Integer labels are kept as-is; anything else is numbered by first
/// appearance.
fn encode_labels(raw: &[String]) -> Vec<usize> {
    if let Ok(ints) = raw.iter().map(|s| s.parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>() {
        return ints;
    }
    let mut ids = HashMap::new();
    raw.iter()
        .map(|s| {
            let next = ids.len();
            *ids.entry(s.as_str()).or_insert(next)
        })
        .collect()
}

/// Writes points (and labels, when present) with a `x0,..,label` header.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (0..dataset.d()).map(|i| format!("x{i}")).collect();
    if dataset.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.point(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = dataset.labels() {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one `index,label` row per point.
pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["index", "label"]).map_err(csv_err)?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads labels written by [`write_labels`], or any CSV whose last column
/// holds integer labels; a non-numeric first row is treated as a header.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_path(path).map_err(csv_err)?;
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let column = rec.len().saturating_sub(1);
        let field = rec.get(column).unwrap_or("");
        match field.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Csv { row: row + 1, column: column + 1, message: e.to_string() }),
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(labels)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Csv { row: 0, column: 0, message: format!("{other:?}") },
    }
}
