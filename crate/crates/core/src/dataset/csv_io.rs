//! CSV ingestion and dataset snapshots.
//!
//! Ingestion reads a headered CSV, drops rows with missing values, maps the
//! named label column to {0,1}, equal-width-bins numeric columns, and
//! dense-codes categorical columns. Snapshots persist the coded matrix as CSV
//! plus a JSON sidecar carrying the quantization metadata.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};

/// Cell values treated as missing after trimming.
const MISSING: [&str; 3] = ["", "?", "NA"];

/// Row accounting from one CSV load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvLoadReport {
    /// Data rows in the file (header excluded).
    pub rows_read: usize,
    /// Rows kept after dropping those with missing values.
    pub rows_kept: usize,
    pub dropped_missing: usize,
}

/// Sidecar metadata persisted next to a dataset snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub bins: usize,
    pub alphabets: Vec<usize>,
    pub seed: Option<u64>,
    pub provenance: String,
}

/// Loads a headered CSV from disk. See [`load_csv_from_reader`].
pub fn load_csv(
    path: &Path,
    label_column: &str,
    bins: usize,
    label_threshold: Option<f64>,
) -> Result<(TabularDataset, CsvLoadReport)> {
    let file = File::open(path)?;
    load_csv_from_reader(file, label_column, bins, label_threshold)
}

/// Loads a dataset from CSV text.
///
/// Rows containing a missing cell (`""`, `"?"`, `"NA"` after trim) are
/// dropped and counted. The label column must either hold exactly two
/// distinct values (lexicographically smaller maps to 0) or be numeric with
/// `label_threshold` declared (`value > threshold` maps to 1). Numeric
/// feature columns are quantized into `bins` equal-width bins and compacted
/// to the observed codes; categorical columns are coded by sorted value.
pub fn load_csv_from_reader<R: Read>(
    reader: R,
    label_column: &str,
    bins: usize,
    label_threshold: Option<f64>,
) -> Result<(TabularDataset, CsvLoadReport)> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> =
        csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Config(format!("label column '{label_column}' not in header")))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut rows_read = 0usize;
    let mut dropped = 0usize;
    for record in csv.records() {
        let record = record?;
        rows_read += 1;
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if cells.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "row {rows_read} has {} cells, header has {}",
                cells.len(),
                headers.len()
            )));
        }
        if cells.iter().any(|c| MISSING.contains(&c.as_str())) {
            dropped += 1;
            continue;
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::Insufficient(format!(
            "no usable rows ({rows_read} read, {dropped} dropped for missing values)"
        )));
    }

    let labels = binarize_labels(rows.iter().map(|r| r[label_idx].as_str()), label_threshold)?;

    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidData("no feature columns besides the label".into()));
    }
    let n = rows.len();
    let d = feature_cols.len();
    let mut records = vec![0u16; n * d];
    for (out_j, &j) in feature_cols.iter().enumerate() {
        let column: Vec<&str> = rows.iter().map(|r| r[j].as_str()).collect();
        let codes = code_column(&column, bins)?;
        for (i, code) in codes.into_iter().enumerate() {
            records[i * d + out_j] = code;
        }
    }
    let feature_names: Vec<String> =
        feature_cols.iter().map(|&j| headers[j].clone()).collect();
    let data = TabularDataset::from_codes(records, labels, feature_names, bins)?;
    let report = CsvLoadReport { rows_read, rows_kept: n, dropped_missing: dropped };
    Ok((data, report))
}

fn binarize_labels<'a>(
    values: impl Iterator<Item = &'a str> + Clone,
    threshold: Option<f64>,
) -> Result<Vec<u8>> {
    if let Some(thr) = threshold {
        let parsed: Option<Vec<f64>> =
            values.clone().map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite())).collect();
        if let Some(nums) = parsed {
            return Ok(nums.into_iter().map(|v| u8::from(v > thr)).collect());
        }
    }
    let distinct: BTreeSet<&str> = values.clone().collect();
    match distinct.len() {
        2 => {
            // Lexicographically smaller value maps to 0.
            let zero = *distinct.iter().next().unwrap();
            Ok(values.map(|v| u8::from(v != zero)).collect())
        }
        k => Err(Error::NonBinaryLabel(format!(
            "label column has {k} distinct values and no applicable threshold rule"
        ))),
    }
}

fn code_column(column: &[&str], bins: usize) -> Result<Vec<u16>> {
    let parsed: Option<Vec<f64>> =
        column.iter().map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite())).collect();
    if let Some(nums) = parsed {
        return Ok(bin_numeric(&nums, bins));
    }
    let distinct: BTreeSet<&str> = column.iter().copied().collect();
    if distinct.len() > u16::MAX as usize {
        return Err(Error::InvalidData(format!(
            "categorical column has {} distinct values (max {})",
            distinct.len(),
            u16::MAX
        )));
    }
    let order: Vec<&str> = distinct.into_iter().collect();
    Ok(column
        .iter()
        .map(|v| order.binary_search(v).unwrap() as u16)
        .collect())
}

fn bin_numeric(values: &[f64], bins: usize) -> Vec<u16> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let raw: Vec<usize> = values
        .iter()
        .map(|&v| {
            if width == 0.0 {
                0
            } else {
                (((v - min) / width) as usize).min(bins - 1)
            }
        })
        .collect();
    // Compact to observed bins so alphabets carry no empty codes.
    let observed: BTreeSet<usize> = raw.iter().copied().collect();
    let order: Vec<usize> = observed.into_iter().collect();
    raw.into_iter().map(|b| order.binary_search(&b).unwrap() as u16).collect()
}

/// Writes a dataset snapshot: coded matrix as CSV (label last) plus a JSON
/// sidecar at `<path>.meta.json`.
pub fn save_csv(data: &TabularDataset, path: &Path, meta: &DatasetMeta) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = data.feature_names().to_vec();
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, &y) in data.records_iter().zip(data.labels()) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(y.to_string());
        writer.write_record(&cells)?;
    }
    writer.flush()?;
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(sidecar, json)?;
    Ok(())
}

/// Reads a snapshot written by [`save_csv`], taking codes verbatim.
pub fn load_snapshot(path: &Path) -> Result<(TabularDataset, DatasetMeta)> {
    let meta_text = std::fs::read_to_string(sidecar_path(path))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;
    let mut csv = csv::Reader::from_path(path)?;
    let headers: Vec<String> = csv.headers()?.iter().map(|h| h.to_string()).collect();
    if headers.last().map(String::as_str) != Some("label") {
        return Err(Error::InvalidData("snapshot must end with a 'label' column".into()));
    }
    let d = headers.len() - 1;
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for record in csv.records() {
        let record = record?;
        for cell in record.iter().take(d) {
            let code: u16 = cell
                .parse()
                .map_err(|_| Error::InvalidData(format!("bad code '{cell}' in snapshot")))?;
            records.push(code);
        }
        let y: u8 = record
            .get(d)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::InvalidData("bad label in snapshot".into()))?;
        labels.push(y);
    }
    let data =
        TabularDataset::from_codes(records, labels, headers[..d].to_vec(), meta.bins)?;
    Ok((data, meta))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}
