//! Labelled datasets: loading, standardization and label statistics.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use log::info;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Float;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("file contains no samples")]
    EmptyFile,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Feature matrix with ±1 labels and stable sample identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub features: Array2<F>,
    pub labels: Vec<i8>,
    pub ids: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Original label spellings mapped to `+1` and `-1`, when the input was not already ±1.
    pub label_mapping: Option<[String; 2]>,
}

impl<F: Float> Dataset<F> {
    /// Builds a dataset with ids `0..m` and generated feature names.
    pub fn new(features: Array2<F>, labels: Vec<i8>) -> Result<Self, DataError> {
        let ids = (0..labels.len()).collect();
        Self::with_ids(features, labels, ids)
    }

    pub fn with_ids(
        features: Array2<F>,
        labels: Vec<i8>,
        ids: Vec<usize>,
    ) -> Result<Self, DataError> {
        let m = features.nrows();
        if labels.len() != m || ids.len() != m {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels and {} ids",
                m,
                labels.len(),
                ids.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(DataError::Invalid(format!("label {} is not +1 or -1", bad)));
        }
        let unique: HashSet<_> = ids.iter().collect();
        if unique.len() != m {
            return Err(DataError::Invalid("sample ids are not unique".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite feature value".into()));
        }
        let feature_names = (1..=features.ncols()).map(|j| format!("x{}", j)).collect();
        Ok(Dataset {
            features,
            labels,
            ids,
            feature_names,
            label_mapping: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Labels as scalars.
    pub fn y(&self) -> Array1<F> {
        self.labels.iter().map(|&l| F::cst(l as f64)).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.labels.len() - pos)
    }

    /// Rows selected by position, keeping their ids.
    pub fn select(&self, rows: &[usize]) -> Self {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_mapping: self.label_mapping.clone(),
        }
    }
}

/// Which CSV column carries the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

fn parse_finite(cell: &str, row: usize, column: usize) -> Result<f64, DataError> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(row, column, format!("not a number: {:?}", cell)))?;
    if !v.is_finite() {
        return Err(parse_err(
            row,
            column,
            format!("non-finite value {:?}", cell),
        ));
    }
    Ok(v)
}

/// Maps raw label cells onto ±1.
///
/// Accepted encodings: `{1, -1}`, `{1, 0}` (0 becomes -1), or any two distinct
/// strings (first seen becomes +1).
fn map_labels(
    raw: &[(usize, String)],
    column: usize,
) -> Result<(Vec<i8>, Option<[String; 2]>), DataError> {
    let numeric: Option<Vec<f64>> = raw
        .iter()
        .map(|(_, s)| s.trim().parse::<f64>().ok())
        .collect();
    if let Some(values) = numeric {
        if values.iter().all(|&v| v == 1.0 || v == -1.0) {
            return Ok((
                values
                    .iter()
                    .map(|&v| if v > 0.0 { 1 } else { -1 })
                    .collect(),
                None,
            ));
        }
        if values.iter().all(|&v| v == 1.0 || v == 0.0) {
            info!("label mapping: 1 -> +1, 0 -> -1");
            let labels = values
                .iter()
                .map(|&v| if v > 0.0 { 1 } else { -1 })
                .collect();
            return Ok((labels, Some(["1".into(), "0".into()])));
        }
    }
    let mut seen: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(raw.len());
    for (row, cell) in raw {
        let cell = cell.trim();
        let pos = match seen.iter().position(|s| s == cell) {
            Some(p) => p,
            None => {
                if seen.len() == 2 {
                    return Err(parse_err(
                        *row,
                        column,
                        format!("third distinct label {:?}", cell),
                    ));
                }
                seen.push(cell.to_string());
                seen.len() - 1
            }
        };
        labels.push(if pos == 0 { 1 } else { -1 });
    }
    let second = seen.get(1).cloned().unwrap_or_default();
    info!("label mapping: {:?} -> +1, {:?} -> -1", seen[0], second);
    Ok((labels, Some([seen[0].clone(), second])))
}

/// Reads a comma separated file with a header row.
///
/// Row numbers in errors count data rows from 1; column numbers count from 1.
pub fn load_csv<F: Float>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
) -> Result<Dataset<F>, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => {
            return Err(DataError::Invalid(format!(
                "label column {} out of range",
                i
            )));
        }
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Invalid(format!("no column named {:?}", name)))?,
    };
    let d = header.len() - 1;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(row, record.len(), "wrong number of fields"));
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push((row, cell.to_string()));
            } else {
                values.push(F::cst(parse_finite(cell, row, j + 1)?));
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let (labels, mapping) = map_labels(&raw_labels, label_idx + 1)?;
    let m = labels.len();
    let features =
        Array2::from_shape_vec((m, d), values).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut ds = Dataset::new(features, labels)?;
    ds.feature_names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    ds.label_mapping = mapping;
    Ok(ds)
}

/// Reads a headed CSV whose columns are all features.
pub fn load_csv_unlabelled<F: Float>(path: impl AsRef<Path>) -> Result<Array2<F>, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let d = reader.headers()?.len();
    let mut values = Vec::new();
    let mut m = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(parse_err(k + 1, record.len(), "wrong number of fields"));
        }
        for (j, cell) in record.iter().enumerate() {
            values.push(F::cst(parse_finite(cell, k + 1, j + 1)?));
        }
        m += 1;
    }
    if m == 0 {
        return Err(DataError::EmptyFile);
    }
    Array2::from_shape_vec((m, d), values).map_err(|e| DataError::Invalid(e.to_string()))
}

/// Writes features followed by a `label` column; values use shortest round-trip formatting.
pub fn write_csv<F: Float>(ds: &Dataset<F>, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, &y) in ds.features.rows().into_iter().zip(&ds.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{}", v)).collect();
        record.push(y.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads the sparse `label idx:val ...` format with 1-based indices.
///
/// Indices within a line need not be increasing. Text after `#` is ignored.
pub fn load_libsvm<F: Float>(path: impl AsRef<Path>) -> Result<Dataset<F>, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0;
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = k + 1;
        let mut tokens = line.split_whitespace();
        let label = tokens.next().unwrap_or_default();
        raw_labels.push((row, label.trim_start_matches('+').to_string()));
        let mut entries = Vec::new();
        for (t, token) in tokens.enumerate() {
            let column = t + 2;
            let (idx, val) = token.split_once(':').ok_or_else(|| {
                parse_err(row, column, format!("expected idx:val, got {:?}", token))
            })?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(row, column, format!("bad index {:?}", idx)))?;
            if idx == 0 {
                return Err(parse_err(row, column, "indices are 1-based"));
            }
            entries.push((idx, parse_finite(val, row, column)?));
            dim = dim.max(idx);
        }
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let (labels, mapping) = map_labels(&raw_labels, 1)?;
    let mut features = Array2::zeros((rows.len(), dim));
    for (i, entries) in rows.iter().enumerate() {
        for &(idx, val) in entries {
            features[[i, idx - 1]] = F::cst(val);
        }
    }
    let mut ds = Dataset::new(features, labels)?;
    ds.label_mapping = mapping;
    Ok(ds)
}

/// Per-feature location and scale used by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats<F> {
    pub mean: Vec<F>,
    pub sd: Vec<F>,
    /// Columns with zero deviation; they are mapped to all zeros.
    pub degenerate: Vec<bool>,
}

impl<F: Float> ScalerStats<F> {
    pub fn fit(features: &Array2<F>) -> Self {
        let m = features.nrows();
        let mut mean = Vec::with_capacity(features.ncols());
        let mut sd = Vec::with_capacity(features.ncols());
        let mut degenerate = Vec::with_capacity(features.ncols());
        for col in features.columns() {
            let (mu, s) = mean_sd(col, m);
            mean.push(mu);
            sd.push(s);
            degenerate.push(s == F::zero());
        }
        ScalerStats {
            mean,
            sd,
            degenerate,
        }
    }

    pub fn transform(&self, features: &Array2<F>) -> Array2<F> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.degenerate[j] {
                col.fill(F::zero());
            } else {
                col.mapv_inplace(|v| (v - self.mean[j]) / self.sd[j]);
            }
        }
        out
    }

    pub fn inverse_transform(&self, features: &Array2<F>) -> Array2<F> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.degenerate[j] {
                col.fill(self.mean[j]);
            } else {
                col.mapv_inplace(|v| v * self.sd[j] + self.mean[j]);
            }
        }
        out
    }
}

/// Sample mean and sample (n-1) standard deviation.
fn mean_sd<F: Float>(col: ArrayView1<F>, m: usize) -> (F, F) {
    let n = F::from_count(m);
    let mean = col.sum() / n;
    if m < 2 {
        return (mean, F::zero());
    }
    let ss: F = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, (ss / F::from_count(m - 1)).sqrt())
}

/// Centers each column and scales it to unit sample standard deviation.
pub fn standardize<F: Float>(ds: &Dataset<F>) -> (Dataset<F>, ScalerStats<F>) {
    let stats = ScalerStats::fit(&ds.features);
    let mut out = ds.clone();
    out.features = stats.transform(&ds.features);
    (out, stats)
}

/// Minority-class fraction `min(#pos, #neg) / m`.
pub fn label_ratio(labels: &[i8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    pos.min(labels.len() - pos) as f64 / labels.len() as f64
}

/// Minority-class count `min(#pos, #neg)`, for exact ratio arithmetic.
pub fn minority_count(labels: &[i8]) -> usize {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    pos.min(labels.len() - pos)
}
