//! CSV datasets: one sample per line, stored in memory as features × samples.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use agufs_core::DenseMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {value:?} is not a finite number")]
    NotNumeric {
        line: u64,
        column: usize,
        value: String,
    },
    #[error("label column {index} is out of range for {columns} columns")]
    LabelColumn { index: usize, columns: usize },
    #[error("no data rows")]
    Empty,
    #[error("no feature columns")]
    NoFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    #[default]
    None,
    Last,
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(LabelColumn::None),
            "last" => Ok(LabelColumn::Last),
            _ => s
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| format!("expected `none`, `last` or a column index, got {s:?}")),
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::None => f.write_str("none"),
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            label_column: LabelColumn::None,
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Features × samples.
    pub x: DenseMatrix,
    pub feature_names: Option<Vec<String>>,
    /// Class ids, contiguous from 0 in order of first appearance.
    pub labels: Option<Vec<usize>>,
    /// Original label strings, indexed by class id.
    pub label_names: Option<Vec<String>>,
    pub source_path: String,
}

impl Dataset {
    pub fn features(&self) -> usize {
        self.x.rows()
    }

    pub fn samples(&self) -> usize {
        self.x.cols()
    }

    pub fn classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let source_path = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: source_path.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header = if opts.has_header {
        let h = reader.headers().map_err(|source| DataError::Csv { line: 1, source })?;
        Some(h.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut label_idx = None;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| DataError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Ragged {
                line,
                expected,
                found: record.len(),
            });
        }
        let li = match label_idx {
            Some(li) => li,
            None => {
                let li = resolve_label_column(opts.label_column, expected)?;
                label_idx = Some(li);
                li
            }
        };
        let mut row = Vec::with_capacity(expected);
        for (column, cell) in record.iter().enumerate() {
            if Some(column) == li {
                raw_labels.push(cell.to_owned());
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(DataError::NotNumeric {
                        line,
                        column: column + 1,
                        value: cell.to_owned(),
                    })
                }
            }
        }
        samples.push(row);
    }

    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    let d = samples[0].len();
    if d == 0 {
        return Err(DataError::NoFeatures);
    }
    let n = samples.len();
    let x = DenseMatrix::from_fn(d, n, |i, j| samples[j][i]);

    let label_idx = label_idx.flatten();
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(j, _)| Some(j) != label_idx)
            .map(|(_, name)| name)
            .collect()
    });
    let (labels, label_names) = if label_idx.is_some() {
        let (ids, names) = index_labels(&raw_labels);
        (Some(ids), Some(names))
    } else {
        (None, None)
    };
    Ok(Dataset {
        x,
        feature_names,
        labels,
        label_names,
        source_path,
    })
}

fn resolve_label_column(col: LabelColumn, width: usize) -> Result<Option<usize>, DataError> {
    match col {
        LabelColumn::None => Ok(None),
        LabelColumn::Last => Ok(Some(width - 1)),
        LabelColumn::Index(index) if index < width => Ok(Some(index)),
        LabelColumn::Index(index) => Err(DataError::LabelColumn { index, columns: width }),
    }
}

fn index_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut ids = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            *ids.entry(s.as_str()).or_insert_with(|| {
                names.push(s.clone());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

/// Writes samples as lines, with the label (if any) in the last column.
/// Values use the shortest representation that parses back to the same bits.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, delimiter: u8) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| io_err(e.into()))?;
    let csv_err = |e: csv::Error| io_err(e.into());
    if let Some(names) = &ds.feature_names {
        let mut header = names.clone();
        if ds.labels.is_some() {
            header.push("label".to_owned());
        }
        writer.write_record(&header).map_err(csv_err)?;
    }
    for j in 0..ds.samples() {
        let mut fields: Vec<String> = ds.x.column(j).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &ds.labels {
            let id = labels[j];
            fields.push(match &ds.label_names {
                Some(names) => names[id].clone(),
                None => id.to_string(),
            });
        }
        writer.write_record(&fields).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)?;
    writer.into_inner().map_err(|e| io_err(e.into_error()))?.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    None,
    #[default]
    Zscore,
}

/// Rescales every feature to zero mean and unit population variance.
/// Constant features become zeros; their indices are returned.
pub fn standardize(mut ds: Dataset, mode: Standardize) -> (Dataset, Vec<usize>) {
    if mode == Standardize::None {
        return (ds, Vec::new());
    }
    let n = ds.samples() as f64;
    let mut constant = Vec::new();
    for i in 0..ds.features() {
        let row = ds.x.row_mut(i);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 || !std.is_finite() {
            row.iter_mut().for_each(|v| *v = 0.0);
            constant.push(i);
        } else {
            row.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    if !constant.is_empty() {
        log::warn!("{} constant feature(s) set to zero", constant.len());
    }
    (ds, constant)
}
