//! Synthetic tabular data with controllable properties.
//!
//! The generator pins class balance and feature balance by exact counts
//! rather than expectation. The first `min(5, d)` features form a "signal
//! block": with probability `feature_balance` a record's whole block is the
//! shared modal vector (all zeros), otherwise each block feature draws from
//! a class-dependent distribution over the non-modal values. The block
//! therefore carries the highest label MI (so balance measurement selects
//! it) and its joint modal probability equals `feature_balance`. Remaining
//! features get a weak class-dependent tilt so models can generalize, and a
//! configurable fraction of records have their labels swapped across
//! classes to create memorizable hard cases.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Geometric decay of the class-conditional block distributions; class 1
/// uses the reversed weights.
const BLOCK_DECAY: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_records: usize,
    pub num_features: usize,
    /// Target share of label 1, hit exactly up to rounding.
    pub class_balance: f64,
    /// Target modal joint probability over the signal block, hit exactly up
    /// to rounding.
    pub feature_balance: f64,
    pub alphabet_size: usize,
    /// Fraction of records whose labels are swapped pairwise across classes;
    /// class counts are unaffected. Drives memorization and with it the
    /// membership signal.
    pub label_noise: f64,
    /// Strength of the class tilt on non-block features. Must stay small
    /// enough that block features keep the top label-MI ranks.
    pub background_tilt: f64,
    /// Class asymmetry of the modal share: class 0 records are modal with
    /// probability `feature_balance + modal_skew`, class 1 with
    /// `feature_balance - modal_skew`. Zero keeps the modal group free of
    /// label disparity; positive values give the modal/non-modal partition
    /// a real prediction-rate gap for fairness experiments.
    pub modal_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_records: 10_000,
            num_features: 16,
            class_balance: 0.5,
            feature_balance: 0.5,
            alphabet_size: 4,
            label_noise: 0.15,
            background_tilt: 0.4,
            modal_skew: 0.0,
            seed: 0,
        }
    }
}

/// Generates a dataset with the given property targets and default noise
/// and tilt settings.
pub fn synthesize(
    n: usize,
    d: usize,
    class_balance: f64,
    feature_balance: f64,
    alphabet_size: usize,
    seed: u64,
) -> Result<TabularDataset> {
    synthesize_with(&SynthConfig {
        num_records: n,
        num_features: d,
        class_balance,
        feature_balance,
        alphabet_size,
        seed,
        ..SynthConfig::default()
    })
}

pub fn synthesize_with(cfg: &SynthConfig) -> Result<TabularDataset> {
    let n = cfg.num_records;
    let d = cfg.num_features;
    let a = cfg.alphabet_size;
    if n < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 records, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if a < 2 {
        return Err(Error::InvalidArgument("alphabet size must be at least 2".into()));
    }
    for (name, v) in [("class_balance", cfg.class_balance), ("feature_balance", cfg.feature_balance)]
    {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must lie in (0,1), got {v}")));
        }
    }
    if !(0.0..=0.5).contains(&cfg.label_noise) {
        return Err(Error::InvalidArgument("label_noise must lie in [0, 0.5]".into()));
    }
    let modal_share = |c: u8| -> f64 {
        if c == 0 {
            cfg.feature_balance + cfg.modal_skew
        } else {
            cfg.feature_balance - cfg.modal_skew
        }
    };
    if !(0.0..=1.0).contains(&modal_share(0)) || !(0.0..=1.0).contains(&modal_share(1)) {
        return Err(Error::InvalidArgument(format!(
            "modal_skew {} pushes a class's modal share outside [0,1]",
            cfg.modal_skew
        )));
    }
    let n1 = (cfg.class_balance * n as f64).round() as usize;
    if n1 == 0 || n1 == n {
        return Err(Error::Insufficient(format!(
            "class_balance {} infeasible at n={n}",
            cfg.class_balance
        )));
    }

    let mut rng = rng_for(cfg.seed, &[0x5359_4e54, n as u64, d as u64]);
    let mut labels = vec![0u8; n];
    for y in labels.iter_mut().take(n1) {
        *y = 1;
    }
    labels.shuffle(&mut rng);

    let class_indices = |labels: &[u8], c: u8| -> Vec<usize> {
        labels.iter().enumerate().filter(|(_, &y)| y == c).map(|(i, _)| i).collect()
    };

    // Exact modal counts per class keep the joint modal probability at the
    // target regardless of class composition.
    let mut modal = vec![false; n];
    for c in 0..2u8 {
        let mut idx = class_indices(&labels, c);
        let k = (modal_share(c) * idx.len() as f64).round() as usize;
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(k) {
            modal[i] = true;
        }
    }

    let block_len = d.min(5);
    let block_dists = block_distributions(a);
    let rest_dists: Vec<[WeightedIndex<f64>; 2]> = (block_len..d)
        .map(|j| {
            [
                tilted_weights(a, (2 * j) % a, cfg.background_tilt),
                tilted_weights(a, (2 * j + 1) % a, cfg.background_tilt),
            ]
        })
        .collect();

    let mut records = vec![0u16; n * d];
    for i in 0..n {
        let y = labels[i] as usize;
        for j in 0..block_len {
            records[i * d + j] = if modal[i] {
                0
            } else if let Some(dist) = &block_dists {
                1 + dist[y].sample(&mut rng) as u16
            } else {
                // Alphabet 2 leaves a single non-modal value.
                1
            };
        }
        for j in block_len..d {
            records[i * d + j] = rest_dists[j - block_len][y].sample(&mut rng) as u16;
        }
    }

    // Pairwise label swaps: k records of each class trade labels, so class
    // counts and feature values are untouched.
    let k_noise = ((cfg.label_noise * n as f64) / 2.0).round() as usize;
    if k_noise > 0 {
        let mut zeros = class_indices(&labels, 0);
        let mut ones = class_indices(&labels, 1);
        let k = k_noise.min(zeros.len()).min(ones.len());
        zeros.shuffle(&mut rng);
        ones.shuffle(&mut rng);
        for t in 0..k {
            labels[zeros[t]] = 1;
            labels[ones[t]] = 0;
        }
    }

    let names = (0..d)
        .map(|j| if j < block_len { format!("sig{j}") } else { format!("bg{j}") })
        .collect();
    TabularDataset::from_codes(records, labels, names, a)
}

/// Class-conditional distributions over the `a-1` non-modal values, or
/// `None` when the alphabet leaves a single non-modal value.
fn block_distributions(a: usize) -> Option<[WeightedIndex<f64>; 2]> {
    let m = a - 1;
    if m < 2 {
        return None;
    }
    let forward: Vec<f64> = (0..m).map(|i| BLOCK_DECAY.powi(i as i32)).collect();
    let backward: Vec<f64> = forward.iter().rev().copied().collect();
    Some([WeightedIndex::new(&forward).unwrap(), WeightedIndex::new(backward).unwrap()])
}

fn tilted_weights(a: usize, boosted: usize, tilt: f64) -> WeightedIndex<f64> {
    let weights: Vec<f64> =
        (0..a).map(|v| if v == boosted { 1.0 + tilt } else { 1.0 }).collect();
    WeightedIndex::new(&weights).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_balance, feature_balance, top_k_features_by_mi};

    #[test]
    fn same_seed_is_identical() {
        let a = synthesize(200, 8, 0.5, 0.5, 4, 7).unwrap();
        let b = synthesize(200, 8, 0.5, 0.5, 4, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = synthesize(200, 8, 0.5, 0.5, 4, 7).unwrap();
        let b = synthesize(200, 8, 0.5, 0.5, 4, 8).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn class_balance_hits_target() {
        let data = synthesize(10_000, 16, 0.5, 0.5, 4, 7).unwrap();
        let cb = class_balance(&data);
        assert!((0.48..=0.52).contains(&cb), "cb={cb}");
        let skew = synthesize(10_000, 16, 0.1, 0.5, 4, 7).unwrap();
        let cb = class_balance(&skew);
        assert!((0.08..=0.12).contains(&cb), "cb={cb}");
    }

    #[test]
    fn feature_balance_hits_target_over_top_features() {
        for &fb in &[0.2, 0.5, 0.8] {
            let data = synthesize(4_000, 16, 0.5, fb, 4, 3).unwrap();
            let top = top_k_features_by_mi(&data, 5).unwrap();
            // The signal block must win the MI ranking for balance control
            // to mean anything.
            let mut sorted = top.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4], "top-5 = {top:?} at fb={fb}");
            let measured = feature_balance(&data, &top).unwrap();
            assert!((measured - fb).abs() < 0.03, "fb target {fb}, measured {measured}");
        }
    }

    #[test]
    fn label_swaps_preserve_class_counts() {
        let cfg = SynthConfig {
            num_records: 1_000,
            label_noise: 0.3,
            class_balance: 0.25,
            ..SynthConfig::default()
        };
        let data = synthesize_with(&cfg).unwrap();
        assert_eq!(data.labels().iter().filter(|&&y| y == 1).count(), 250);
    }

    #[test]
    fn modal_skew_creates_label_disparity_on_the_block() {
        // P(y=1 | modal) by Bayes: cb*(fb-s) / (cb*(fb-s) + (1-cb)*(fb+s)).
        let rate_given_block_zero = |skew: f64| -> f64 {
            let cfg = SynthConfig {
                num_records: 20_000,
                label_noise: 0.0,
                modal_skew: skew,
                seed: 5,
                ..SynthConfig::default()
            };
            let data = synthesize_with(&cfg).unwrap();
            let (mut ones, mut total) = (0usize, 0usize);
            for i in 0..data.num_records() {
                if data.record(i)[0] == 0 {
                    total += 1;
                    ones += usize::from(data.labels()[i] == 1);
                }
            }
            ones as f64 / total as f64
        };
        let neutral = rate_given_block_zero(0.0);
        assert!((neutral - 0.5).abs() < 0.02, "no-skew modal rate {neutral}");
        let skewed = rate_given_block_zero(0.3);
        // 0.5*0.2 / (0.5*0.2 + 0.5*0.8) = 0.2.
        assert!((skewed - 0.2).abs() < 0.02, "skewed modal rate {skewed}");
    }

    #[test]
    fn modal_skew_keeps_joint_feature_balance_at_even_classes() {
        let cfg = SynthConfig {
            num_records: 8_000,
            modal_skew: 0.25,
            seed: 9,
            ..SynthConfig::default()
        };
        let data = synthesize_with(&cfg).unwrap();
        let top = top_k_features_by_mi(&data, 5).unwrap();
        let measured = feature_balance(&data, &top).unwrap();
        assert!((measured - 0.5).abs() < 0.03, "fb drifted to {measured}");
    }

    #[test]
    fn infeasible_targets_error() {
        assert!(synthesize(10, 4, 0.01, 0.5, 4, 0).is_err());
        assert!(synthesize(5, 4, 0.5, 0.5, 4, 0).is_err());
        assert!(synthesize(100, 4, 0.5, 0.5, 1, 0).is_err());
        assert!(synthesize(100, 0, 0.5, 0.5, 4, 0).is_err());
        let overshoot = SynthConfig { modal_skew: 0.8, ..SynthConfig::default() };
        assert!(synthesize_with(&overshoot).is_err());
    }
}
