//! k-nearest-neighbor classifier over Hamming distance between code
//! vectors.

use serde::{Deserialize, Serialize};

use super::KnnSpec;
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

/// Lazy learner: stores the training codes and labels. Neighbor selection
/// orders by (distance, record codes, label), so predictions do not depend
/// on training row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    num_features: usize,
    codes: Vec<u16>,
    labels: Vec<u8>,
}

impl KnnModel {
    pub fn fit(spec: &KnnSpec, data: &TabularDataset) -> Result<Self> {
        if spec.k > data.num_records() {
            return Err(Error::InvalidSpec(format!(
                "k={} exceeds the {}-record training set",
                spec.k,
                data.num_records()
            )));
        }
        let mut codes = Vec::with_capacity(data.num_records() * data.num_features());
        for row in data.records_iter() {
            codes.extend_from_slice(row);
        }
        Ok(Self {
            k: spec.k,
            num_features: data.num_features(),
            codes,
            labels: data.labels().to_vec(),
        })
    }

    fn row(&self, i: usize) -> &[u16] {
        &self.codes[i * self.num_features..(i + 1) * self.num_features]
    }

    /// Class probabilities with add-one smoothing over the k neighbor
    /// labels: p_c = (count_c + 1) / (k + 2).
    pub fn predict_record(&self, record: &[u16]) -> [f64; 2] {
        let n = self.labels.len();
        let d = self.num_features;
        let mut dist = vec![0u32; n];
        for (i, dv) in dist.iter_mut().enumerate() {
            let row = self.row(i);
            *dv = record
                .iter()
                .take(d)
                .zip(row)
                .filter(|(a, b)| a != b)
                .count() as u32;
        }

        // Distances are integers in 0..=d: bucket counts find the boundary
        // distance, then only boundary rows need the content tie-break.
        let mut buckets = vec![0usize; d + 1];
        for &dv in &dist {
            buckets[dv as usize] += 1;
        }
        let mut taken = 0usize;
        let mut boundary = 0usize;
        for (b, &cnt) in buckets.iter().enumerate() {
            if taken + cnt >= self.k {
                boundary = b;
                break;
            }
            taken += cnt;
        }

        let mut count1 = 0usize;
        for i in 0..n {
            if (dist[i] as usize) < boundary && self.labels[i] == 1 {
                count1 += 1;
            }
        }
        let need = self.k - taken;
        let mut edge: Vec<usize> =
            (0..n).filter(|&i| dist[i] as usize == boundary).collect();
        edge.sort_by(|&a, &b| {
            self.row(a).cmp(self.row(b)).then(self.labels[a].cmp(&self.labels[b]))
        });
        count1 += edge.iter().take(need).filter(|&&i| self.labels[i] == 1).count();

        let p1 = (count1 + 1) as f64 / (self.k + 2) as f64;
        [1.0 - p1, p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_toy(records: Vec<u16>, labels: Vec<u8>, d: usize, k: usize) -> KnnModel {
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let data = TabularDataset::from_codes(records, labels, names, 10).unwrap();
        KnnModel::fit(&KnnSpec { k, p: 2 }, &data).unwrap()
    }

    #[test]
    fn add_one_smoothing_on_three_neighbors() {
        // Query (0,0): distances 0,0,0 to the three rows; labels {1,1,0}.
        let model = fit_toy(vec![0, 0, 0, 0, 0, 0], vec![1, 1, 0], 2, 3);
        let p = model.predict_record(&[0, 0]);
        assert!((p[0] - 0.4).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn k1_recovers_own_label() {
        let records = vec![0, 0, 1, 1, 2, 2, 3, 3];
        let labels = vec![0, 1, 0, 1];
        let model = fit_toy(records.clone(), labels.clone(), 2, 1);
        for i in 0..4 {
            let p = model.predict_record(&records[i * 2..i * 2 + 2]);
            let pred = u8::from(p[1] > p[0]);
            assert_eq!(pred, labels[i]);
        }
    }

    #[test]
    fn prediction_invariant_under_training_row_order() {
        let records = vec![0, 0, 0, 1, 1, 0, 1, 1, 2, 2];
        let labels = vec![0, 0, 1, 1, 1];
        let a = fit_toy(records, labels, 2, 3);
        let reordered = vec![2, 2, 1, 1, 1, 0, 0, 1, 0, 0];
        let relabels = vec![1, 1, 1, 0, 0];
        let b = fit_toy(reordered, relabels, 2, 3);
        for q in [[0u16, 0], [1, 1], [0, 1], [2, 0]] {
            assert_eq!(a.predict_record(&q), b.predict_record(&q), "query {q:?}");
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let names = vec!["f0".into()];
        let data = TabularDataset::from_codes(vec![0, 1], vec![0, 1], names, 10).unwrap();
        assert!(KnnModel::fit(&KnnSpec { k: 3, p: 2 }, &data).is_err());
    }
}
