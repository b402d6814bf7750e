//! One-hot encoding of discrete feature codes.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;

/// Maps records over per-feature alphabets into a fixed dense layout with
/// one column per (feature, value) pair. A code outside the alphabet it was
/// built with encodes as an all-zero block, which acts as the reserved
/// "other" value for inputs unseen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    alphabet_sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl OneHotEncoder {
    pub fn from_dataset(data: &TabularDataset) -> Self {
        Self::new(data.alphabet_sizes().to_vec())
    }

    pub fn new(alphabet_sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(alphabet_sizes.len());
        let mut dim = 0;
        for &a in &alphabet_sizes {
            offsets.push(dim);
            dim += a;
        }
        Self { alphabet_sizes, offsets, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_features(&self) -> usize {
        self.alphabet_sizes.len()
    }

    /// Column indices set to 1 for this record; unseen codes contribute none.
    pub fn active_columns(&self, record: &[u16]) -> Vec<usize> {
        record
            .iter()
            .enumerate()
            .filter(|&(j, &v)| (v as usize) < self.alphabet_sizes[j])
            .map(|(j, &v)| self.offsets[j] + v as usize)
            .collect()
    }

    /// Writes the dense encoding of `record` into `out` (length `dim`).
    pub fn encode_into(&self, record: &[u16], out: &mut [f64]) {
        out.fill(0.0);
        for col in self.active_columns(record) {
            out[col] = 1.0;
        }
    }

    /// Dense n x dim matrix for the records at `indices`.
    pub fn encode_batch(&self, data: &TabularDataset, indices: &[usize]) -> ndarray::Array2<f64> {
        let mut x = ndarray::Array2::zeros((indices.len(), self.dim));
        for (row, &i) in indices.iter().enumerate() {
            for col in self.active_columns(data.record(i)) {
                x[[row, col]] = 1.0;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_per_feature() {
        let enc = OneHotEncoder::new(vec![2, 3]);
        assert_eq!(enc.dim(), 5);
        assert_eq!(enc.active_columns(&[1, 0]), vec![1, 2]);
        assert_eq!(enc.active_columns(&[0, 2]), vec![0, 4]);
    }

    #[test]
    fn unseen_code_encodes_as_zero_block() {
        let enc = OneHotEncoder::new(vec![2, 3]);
        assert_eq!(enc.active_columns(&[5, 1]), vec![3]);
        let mut buf = vec![9.0; 5];
        enc.encode_into(&[5, 1], &mut buf);
        assert_eq!(buf, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
