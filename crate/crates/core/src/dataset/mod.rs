//! Tabular datasets and their measurable properties.
//!
//! A [`TabularDataset`] is a discretized feature matrix with binary labels:
//! every feature takes values from a finite alphabet (numeric columns are
//! quantized at load time, categorical columns dense-coded). All property
//! measurements — class balance, feature balance, per-feature entropy,
//! feature/label mutual information — are empirical frequencies over this
//! discrete universe.

mod csv_io;
mod gmm;
mod split;
mod synth;

pub use csv_io::{
    load_csv, load_csv_from_reader, load_snapshot, save_csv, CsvLoadReport, DatasetMeta,
};
pub use gmm::gmm_binary_labels;
pub use split::{
    make_biased_split, make_split, make_split_with_eval_cap, resample_to, ExperimentSplit,
    DEFAULT_EVAL_CAP,
};
pub use synth::{synthesize, synthesize_with, SynthConfig};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default equal-width bin count for quantizing numeric columns.
pub const DEFAULT_BINS: usize = 10;

/// A discretized feature matrix with binary labels.
///
/// Records are stored row-major; feature `j` of record `i` is a code in
/// `0..alphabet_size(j)`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    records: Vec<u16>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    alphabet_sizes: Vec<usize>,
    bins_per_feature: usize,
    num_records: usize,
    num_features: usize,
}

impl TabularDataset {
    /// Builds a dataset from row-major codes and labels, computing each
    /// feature's alphabet as `max observed code + 1`.
    pub fn from_codes(
        records: Vec<u16>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        bins_per_feature: usize,
    ) -> Result<Self> {
        let d = feature_names.len();
        let n = labels.len();
        if d == 0 {
            return Err(Error::InvalidData("dataset needs at least one feature".into()));
        }
        if n == 0 {
            return Err(Error::InvalidData("dataset needs at least one record".into()));
        }
        if records.len() != n * d {
            return Err(Error::InvalidData(format!(
                "expected {} feature values ({} records x {} features), got {}",
                n * d,
                n,
                d,
                records.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidData(format!("label {bad} is not in {{0,1}}")));
        }
        let mut alphabet_sizes = vec![1usize; d];
        for row in records.chunks_exact(d) {
            for (j, &v) in row.iter().enumerate() {
                alphabet_sizes[j] = alphabet_sizes[j].max(v as usize + 1);
            }
        }
        Ok(Self {
            records,
            labels,
            feature_names,
            alphabet_sizes,
            bins_per_feature,
            num_records: n,
            num_features: d,
        })
    }

    pub fn num_records(&self) -> usize {
        self.num_records
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    pub fn bins_per_feature(&self) -> usize {
        self.bins_per_feature
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Feature codes of record `i`.
    pub fn record(&self, i: usize) -> &[u16] {
        &self.records[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn records_iter(&self) -> impl Iterator<Item = &[u16]> {
        self.records.chunks_exact(self.num_features)
    }

    /// Materializes the subset of records at `indices` (order kept).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidData("empty subset".into()));
        }
        let d = self.num_features;
        let mut records = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.num_records {
                return Err(Error::InvalidData(format!("index {i} out of range")));
            }
            records.extend_from_slice(self.record(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            records,
            labels,
            feature_names: self.feature_names.clone(),
            // Keep the parent alphabets: a subset may not observe every code
            // but still lives in the same universe.
            alphabet_sizes: self.alphabet_sizes.clone(),
            bins_per_feature: self.bins_per_feature,
            num_records: indices.len(),
            num_features: d,
        })
    }

    /// Returns a copy with the labels replaced.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.num_records {
            return Err(Error::InvalidData("label count mismatch".into()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidData("labels must be in {0,1}".into()));
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }
}

/// Measured data properties of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// Share of records with label 1.
    pub class_balance: f64,
    /// Empirical probability of the modal joint feature-vector over the
    /// measured feature subset.
    pub feature_balance: f64,
    /// Mean per-feature Shannon entropy, in bits.
    pub entropy: f64,
    pub num_features: usize,
    pub num_records: usize,
}

/// Share of records with label 1.
pub fn class_balance(data: &TabularDataset) -> f64 {
    let ones = data.labels.iter().filter(|&&y| y == 1).count();
    ones as f64 / data.num_records as f64
}

/// Empirical probability of the modal joint feature-vector over the
/// restriction of the records to `features`.
///
/// Returns 1.0 when all restricted records are identical; the odds form
/// `p/(1-p)` is derivable by the caller.
pub fn feature_balance(data: &TabularDataset, features: &[usize]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("feature_balance needs at least one feature".into()));
    }
    for &j in features {
        if j >= data.num_features {
            return Err(Error::InvalidArgument(format!("feature index {j} out of range")));
        }
    }
    let mut counts: HashMap<Vec<u16>, usize> = HashMap::new();
    for row in data.records_iter() {
        let key: Vec<u16> = features.iter().map(|&j| row[j]).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    let modal = counts.values().copied().max().unwrap_or(0);
    Ok(modal as f64 / data.num_records as f64)
}

/// Mean per-feature Shannon entropy in bits: `(1/d) * sum_j H[a_j]` with
/// `H[a_j] = -sum_c P_c log2 P_c` over empirical value frequencies.
pub fn dataset_entropy(data: &TabularDataset) -> f64 {
    let d = data.num_features;
    let total: f64 = (0..d).map(|j| feature_entropy(data, j)).sum();
    total / d as f64
}

/// Shannon entropy in bits of one feature's empirical value distribution.
pub fn feature_entropy(data: &TabularDataset, feature: usize) -> f64 {
    let mut counts = vec![0usize; data.alphabet_sizes[feature]];
    for row in data.records_iter() {
        counts[row[feature] as usize] += 1;
    }
    entropy_bits(&counts)
}

fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Empirical mutual information in bits between feature `j` and the label,
/// from the joint frequency table.
pub fn feature_label_mi(data: &TabularDataset, feature: usize) -> f64 {
    let k = data.alphabet_sizes[feature];
    let mut joint = vec![[0usize; 2]; k];
    for (row, &y) in data.records_iter().zip(&data.labels) {
        joint[row[feature] as usize][y as usize] += 1;
    }
    let n = data.num_records as f64;
    let mut value_marg = vec![0usize; k];
    let mut label_marg = [0usize; 2];
    for (v, cell) in joint.iter().enumerate() {
        value_marg[v] = cell[0] + cell[1];
        label_marg[0] += cell[0];
        label_marg[1] += cell[1];
    }
    let mut mi = 0.0;
    for (v, cell) in joint.iter().enumerate() {
        for y in 0..2 {
            let c = cell[y];
            if c == 0 {
                continue;
            }
            let p_joint = c as f64 / n;
            let p_v = value_marg[v] as f64 / n;
            let p_y = label_marg[y] as f64 / n;
            mi += p_joint * (p_joint / (p_v * p_y)).log2();
        }
    }
    mi.max(0.0)
}

/// Indices of the `k` features with the highest empirical mutual
/// information with the label, descending; ties broken by lower index.
pub fn top_k_features_by_mi(data: &TabularDataset, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > data.num_features {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            data.num_features
        )));
    }
    let mut scored: Vec<(usize, f64)> =
        (0..data.num_features).map(|j| (j, feature_label_mi(data, j))).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(j, _)| j).collect())
}

/// Measures all data properties in one pass.
///
/// Feature balance is taken over the top-5 label-MI features (or all
/// features when `d < 5`), mirroring how balance sweeps select features.
pub fn measure_properties(data: &TabularDataset) -> Result<PropertyReport> {
    let k = data.num_features.min(5);
    let top = top_k_features_by_mi(data, k)?;
    Ok(PropertyReport {
        class_balance: class_balance(data),
        feature_balance: feature_balance(data, &top)?,
        entropy: dataset_entropy(data),
        num_features: data.num_features,
        num_records: data.num_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(records: Vec<u16>, labels: Vec<u8>, d: usize) -> TabularDataset {
        let names = (0..d).map(|j| format!("f{j}")).collect();
        TabularDataset::from_codes(records, labels, names, DEFAULT_BINS).unwrap()
    }

    #[test]
    fn class_balance_counts_label_one_share() {
        assert_eq!(class_balance(&toy(vec![0, 0, 0, 0], vec![0, 1, 0, 1], 1)), 0.5);
        assert_eq!(class_balance(&toy(vec![0, 0, 0, 0], vec![1, 1, 1, 0], 1)), 0.75);
    }

    #[test]
    fn feature_balance_single_feature() {
        // values [a,a,b,b] -> 0.5; [a,a,a,b] -> 0.75
        let even = toy(vec![0, 0, 1, 1], vec![0, 0, 1, 1], 1);
        assert_eq!(feature_balance(&even, &[0]).unwrap(), 0.5);
        let skew = toy(vec![0, 0, 0, 1], vec![0, 0, 1, 1], 1);
        assert_eq!(feature_balance(&skew, &[0]).unwrap(), 0.75);
    }

    #[test]
    fn feature_balance_joint_modal_vector() {
        // {(a,x):6,(a,y):3,(b,x):1} -> 0.6
        let mut rec = Vec::new();
        for _ in 0..6 {
            rec.extend([0u16, 0]);
        }
        for _ in 0..3 {
            rec.extend([0u16, 1]);
        }
        rec.extend([1u16, 0]);
        let data = toy(rec, vec![0; 10], 2);
        assert!((feature_balance(&data, &[0, 1]).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn feature_balance_all_identical_is_one() {
        let data = toy(vec![3, 3, 3, 3], vec![0, 1, 0, 1], 1);
        assert_eq!(feature_balance(&data, &[0]).unwrap(), 1.0);
    }

    #[test]
    fn entropy_constant_features_is_zero() {
        let data = toy(vec![2, 2, 2, 2, 2, 2], vec![0, 1, 0], 2);
        assert_eq!(dataset_entropy(&data), 0.0);
    }

    #[test]
    fn entropy_fair_coin_is_one_bit() {
        let data = toy(vec![0, 1, 0, 1], vec![0, 0, 1, 1], 1);
        assert!((dataset_entropy(&data) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_two_feature_hand_case() {
        // Feature 0 frequencies (0.5, 0.5), feature 1 frequencies (0.25, 0.75):
        // H = (1.0 + 0.8112781244591328) / 2.
        let rec = vec![
            0, 0, //
            0, 1, //
            1, 1, //
            1, 1, //
        ];
        let data = toy(rec, vec![0, 0, 1, 1], 2);
        let expected = (1.0 + 0.811_278_124_459_132_8) / 2.0;
        assert!((dataset_entropy(&data) - expected).abs() < 1e-9);
    }

    #[test]
    fn top_k_prefers_label_copy_feature() {
        // Feature 1 equals the label, feature 0 is independent.
        let rec = vec![
            0, 0, //
            1, 1, //
            0, 1, //
            1, 0, //
        ];
        let data = toy(rec, vec![0, 1, 1, 0], 2);
        assert_eq!(top_k_features_by_mi(&data, 1).unwrap(), vec![1]);
    }

    #[test]
    fn top_k_tie_breaks_by_lower_index() {
        // Three constant features: all have MI 0 with the label.
        let data = toy(vec![0, 0, 0, 0, 0, 0, 0, 0], vec![0, 1, 0, 1], 2);
        assert_eq!(top_k_features_by_mi(&data, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let err = TabularDataset::from_codes(vec![0, 0], vec![0, 2], vec!["f".into()], 10);
        assert!(err.is_err());
    }

    #[test]
    fn subset_keeps_alphabets() {
        let data = toy(vec![0, 1, 2, 3], vec![0, 1, 0, 1], 1);
        let sub = data.subset(&[0, 1]).unwrap();
        assert_eq!(sub.alphabet_sizes(), &[4]);
        assert_eq!(sub.num_records(), 2);
    }
}
