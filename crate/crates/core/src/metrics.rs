//! Model-property measurements: the three fairness deltas, the
//! membership-indistinguishability deviation, the record/parameter
//! mutual-information estimate, and rank correlations.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{top_k_features_by_mi, TabularDataset};
use crate::error::{Error, Result};
use crate::models::{train, ModelCore, ModelSpec, TrainedModel};
use crate::seed::{derive_seed, rng_for};

/// Fairness and indistinguishability measurements for one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub delta_g: f64,
    pub delta_p: Option<f64>,
    pub delta_i: f64,
    pub delta_mi: f64,
    pub group_feature: usize,
    /// Disjoint record-index sets: feature value 0 vs the rest.
    pub group_partition: (Vec<usize>, Vec<usize>),
}

/// Histogram mutual-information estimate between records and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    /// Mean per-record information in bits, clipped at 0.
    pub i_x: f64,
    pub num_retrainings: usize,
    pub bins: usize,
    /// First-order bias scale of the plug-in estimator; estimates at or
    /// below this level are indistinguishable from independence.
    pub noise_floor: f64,
}

pub const DEFAULT_MI_BINS: usize = 8;
pub const DEFAULT_PROBE_PARAMS: usize = 16;

/// Splits `indices` on a feature: value 0 goes to g0, the rest to g1.
pub fn group_partition(
    data: &TabularDataset,
    indices: &[usize],
    feature: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for &i in indices {
        if data.record(i)[feature] == 0 {
            g0.push(i);
        } else {
            g1.push(i);
        }
    }
    (g0, g1)
}

/// Highest label-informative feature, the default protected attribute.
pub fn default_group_feature(data: &TabularDataset) -> usize {
    top_k_features_by_mi(data, 1).expect("dataset has at least one feature")[0]
}

fn predicted_labels(model: &TrainedModel, data: &TabularDataset, indices: &[usize]) -> Vec<u8> {
    model.predict_proba_batch(data, indices).iter().map(|p| p.argmax_label).collect()
}

/// Demographic-parity gap: half the L1 distance between the two groups'
/// predicted-label distributions.
pub fn delta_group(
    model: &TrainedModel,
    data: &TabularDataset,
    g0: &[usize],
    g1: &[usize],
) -> Result<f64> {
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::EmptyGroup("delta_group needs two nonempty groups".into()));
    }
    let rate1 = |idx: &[usize]| {
        let preds = predicted_labels(model, data, idx);
        preds.iter().filter(|&&p| p == 1).count() as f64 / idx.len() as f64
    };
    let (r0, r1) = (rate1(g0), rate1(g1));
    // Two classes: the class-0 gap mirrors the class-1 gap.
    Ok(0.5 * ((r0 - r1).abs() + ((1.0 - r0) - (1.0 - r1)).abs()))
}

/// Equal-opportunity gap: per-class recall differences, averaged.
pub fn delta_predictive(
    model: &TrainedModel,
    data: &TabularDataset,
    g0: &[usize],
    g1: &[usize],
) -> Result<f64> {
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::EmptyGroup("delta_predictive needs two nonempty groups".into()));
    }
    let recalls = |idx: &[usize], name: &str| -> Result<[f64; 2]> {
        let preds = predicted_labels(model, data, idx);
        let mut hit = [0usize; 2];
        let mut tot = [0usize; 2];
        for (&i, &p) in idx.iter().zip(&preds) {
            let y = data.label(i) as usize;
            tot[y] += 1;
            hit[y] += usize::from(p == y as u8);
        }
        for c in 0..2 {
            if tot[c] == 0 {
                return Err(Error::MissingClassInGroup { group: name.into(), class: c as u8 });
            }
        }
        Ok([hit[0] as f64 / tot[0] as f64, hit[1] as f64 / tot[1] as f64])
    };
    let a = recalls(g0, "g0")?;
    let b = recalls(g1, "g1")?;
    Ok(0.5 * ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()))
}

/// Mean over sampled record pairs of |prediction TV distance − normalized
/// Hamming distance|. All pairs are used when the budget covers them.
pub fn delta_individual(
    model: &TrainedModel,
    data: &TabularDataset,
    indices: &[usize],
    pair_budget: usize,
    seed: u64,
) -> Result<f64> {
    let n = indices.len();
    if n < 2 {
        return Err(Error::Insufficient("delta_individual needs at least 2 records".into()));
    }
    if pair_budget == 0 {
        return Err(Error::InvalidArgument("pair_budget must be positive".into()));
    }
    let preds = model.predict_proba_batch(data, indices);
    let d = data.num_features() as f64;
    let pair_value = |a: usize, b: usize| {
        let tv = 0.5
            * ((preds[a].probs[0] - preds[b].probs[0]).abs()
                + (preds[a].probs[1] - preds[b].probs[1]).abs());
        let differing = data
            .record(indices[a])
            .iter()
            .zip(data.record(indices[b]))
            .filter(|(x, y)| x != y)
            .count();
        (tv - differing as f64 / d).abs()
    };
    let all_pairs = n * (n - 1) / 2;
    let mut total = 0.0;
    if pair_budget >= all_pairs {
        for a in 0..n {
            for b in a + 1..n {
                total += pair_value(a, b);
            }
        }
        Ok(total / all_pairs as f64)
    } else {
        let mut rng = rng_for(seed, &[0x4449, n as u64]);
        for _ in 0..pair_budget {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            total += pair_value(a, b);
        }
        Ok(total / pair_budget as f64)
    }
}

/// Maximum absolute log-ratio between the smoothed predicted-label
/// frequencies of members and non-members (natural log, add-one smoothing).
pub fn delta_mia_indist(
    target: &TrainedModel,
    data: &TabularDataset,
    members: &[usize],
    nonmembers: &[usize],
) -> Result<f64> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::EmptyGroup("delta_mia_indist needs both record sets".into()));
    }
    let smoothed = |idx: &[usize]| {
        let preds = predicted_labels(target, data, idx);
        let ones = preds.iter().filter(|&&p| p == 1).count();
        let n = idx.len() as f64;
        [
            (idx.len() - ones) as f64 + 1.0,
            ones as f64 + 1.0,
        ]
        .map(|c| c / (n + 2.0))
    };
    let q1 = smoothed(members);
    let q0 = smoothed(nonmembers);
    let mut worst = 0.0f64;
    for c in 0..2 {
        worst = worst.max((q1[c] / q0[c]).ln().abs());
    }
    Ok(worst)
}

/// All fairness measurements in one pass: deltas over `train_indices`
/// partitioned on `group_feature`, indistinguishability against
/// `nonmembers`.
pub fn measure_fairness(
    model: &TrainedModel,
    data: &TabularDataset,
    train_indices: &[usize],
    nonmembers: &[usize],
    group_feature: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<FairnessReport> {
    let (g0, g1) = group_partition(data, train_indices, group_feature);
    let delta_g = delta_group(model, data, &g0, &g1)?;
    // Recall gaps are undefined when a class is absent from a group; the
    // report carries None rather than failing the whole measurement.
    let delta_p = delta_predictive(model, data, &g0, &g1).ok();
    let delta_i = delta_individual(model, data, train_indices, pair_budget, seed)?;
    let delta_mi = delta_mia_indist(model, data, train_indices, nonmembers)?;
    Ok(FairnessReport {
        delta_g,
        delta_p,
        delta_i,
        delta_mi,
        group_feature,
        group_partition: (g0, g1),
    })
}

/// Raw material for the mutual-information estimate: per-record bootstrap
/// presence and the probed parameter values of each retrained model.
#[derive(Debug, Clone, PartialEq)]
pub struct MiObservations {
    /// presence[i][r]: record i appeared in retraining r's bootstrap.
    pub presence: Vec<Vec<bool>>,
    /// probes[r][k]: value of probed coordinate k after retraining r.
    pub probes: Vec<Vec<f64>>,
}

/// Retrains `spec` on seeded bootstrap resamples and records which records
/// each resample contained alongside a fixed set of probed parameters.
pub fn collect_mi_observations(
    spec: &ModelSpec,
    data: &TabularDataset,
    num_retrainings: usize,
    probe_param_count: usize,
    seed: u64,
) -> Result<MiObservations> {
    if num_retrainings < 2 {
        return Err(Error::InvalidArgument("need at least 2 retrainings".into()));
    }
    if probe_param_count == 0 {
        return Err(Error::InvalidArgument("probe_param_count must be positive".into()));
    }
    let n = data.num_records();
    let mut presence = vec![vec![false; num_retrainings]; n];
    let mut probes = Vec::with_capacity(num_retrainings);
    let mut probe_coords: Option<Vec<usize>> = None;
    for r in 0..num_retrainings {
        let mut rng = rng_for(seed, &[0x4d49_424f, r as u64]);
        let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        for &i in &boot {
            presence[i][r] = true;
        }
        let model = train(spec, &data.subset(&boot)?, derive_seed(seed, &[0x4d49, r as u64]))?;
        let ModelCore::Mlp(mlp) = &model.core else {
            return Err(Error::InvalidArgument(format!(
                "mutual-information probing supports MLP-family models, got {}",
                spec.family().name()
            )));
        };
        let theta = mlp.theta();
        let coords = probe_coords.get_or_insert_with(|| {
            let mut all: Vec<usize> = (0..theta.len()).collect();
            all.shuffle(&mut rng_for(seed, &[0x50_524f_4245]));
            all.truncate(probe_param_count.min(theta.len()));
            all
        });
        probes.push(coords.iter().map(|&c| theta[c]).collect());
    }
    Ok(MiObservations { presence, probes })
}

/// Equal-frequency bin index per retraining for one probe coordinate;
/// identical values always share a bin.
fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let r = values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0usize; r];
    let mut rank_of_value_start = 0;
    for pos in 0..r {
        if pos > 0 && values[order[pos]].total_cmp(&values[order[pos - 1]]).is_ne() {
            rank_of_value_start = pos;
        }
        out[order[pos]] = rank_of_value_start * bins / r;
    }
    out
}

/// Plug-in mutual information (bits) between a binary row and a binned row,
/// with first-order (Miller-Madow) bias subtracted and clipped at 0.
fn corrected_mi(presence: &[bool], quant: &[usize], bins: usize) -> f64 {
    let r = presence.len();
    let mut joint = vec![[0usize; 2]; bins];
    for (&p, &q) in presence.iter().zip(quant) {
        joint[q][usize::from(p)] += 1;
    }
    let rf = r as f64;
    let mut mi = 0.0;
    let marg_p = [
        presence.iter().filter(|&&p| !p).count() as f64 / rf,
        presence.iter().filter(|&&p| p).count() as f64 / rf,
    ];
    let mut occupied_q = 0usize;
    for cell in &joint {
        let row_total = (cell[0] + cell[1]) as f64 / rf;
        if row_total == 0.0 {
            continue;
        }
        occupied_q += 1;
        for (b, &count) in cell.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let pj = count as f64 / rf;
            mi += pj * (pj / (row_total * marg_p[b])).log2();
        }
    }
    let occupied_p = marg_p.iter().filter(|&&m| m > 0.0).count();
    let bias = (occupied_p - 1) as f64 * (occupied_q - 1) as f64
        / (2.0 * rf * std::f64::consts::LN_2);
    (mi - bias).max(0.0)
}

/// Turns collected observations into the final estimate. Per record:
/// information between its presence bit and each quantized probe
/// coordinate, summed, capped by the record's own self-information.
pub fn estimate_from_observations(
    data: &TabularDataset,
    obs: &MiObservations,
    bins: usize,
) -> Result<MIEstimate> {
    let n = data.num_records();
    if obs.presence.len() != n {
        return Err(Error::InvalidArgument(format!(
            "presence rows {} do not match dataset size {n}",
            obs.presence.len()
        )));
    }
    let num_retrainings = obs.probes.len();
    if num_retrainings < 2 || bins == 0 {
        return Err(Error::InvalidArgument("need >=2 retrainings and >=1 bin".into()));
    }
    let k = obs.probes[0].len();
    let quantized: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            let column: Vec<f64> = obs.probes.iter().map(|row| row[c]).collect();
            quantile_bins(&column, bins)
        })
        .collect();

    // Self-information of each record's feature vector within the dataset.
    let mut counts = std::collections::HashMap::new();
    for i in 0..n {
        *counts.entry(data.record(i)).or_insert(0usize) += 1;
    }

    let mut total = 0.0;
    for i in 0..n {
        let h_x = -(counts[data.record(i)] as f64 / n as f64).log2();
        let mut info = 0.0;
        for q in &quantized {
            info += corrected_mi(&obs.presence[i], q, bins);
        }
        total += info.min(h_x);
    }
    let noise_floor = k as f64 * (bins.min(num_retrainings) - 1) as f64
        / (2.0 * num_retrainings as f64 * std::f64::consts::LN_2);
    Ok(MIEstimate { i_x: (total / n as f64).max(0.0), num_retrainings, bins, noise_floor })
}

/// Bootstrap-retraining estimate of the mean information shared between a
/// training record and the learned parameters.
pub fn mutual_info_records_params(
    spec: &ModelSpec,
    data: &TabularDataset,
    num_retrainings: usize,
    bins: usize,
    probe_param_count: usize,
    seed: u64,
) -> Result<MIEstimate> {
    let obs = collect_mi_observations(spec, data, num_retrainings, probe_param_count, seed)?;
    estimate_from_observations(data, &obs, bins)
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need two equal-length series of >=3 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("correlation input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks with ties sharing their mean position (1-based).
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]].total_cmp(&x[order[start]]).is_eq() {
            end += 1;
        }
        let mean_rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean_rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman_r(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_r(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;
    use crate::models::{Family, MlpModel, MlpSpec, OneHotEncoder, TrainingMeta};

    /// Zero-hidden-layer model that maps feature `f`'s code through fixed
    /// logits, ignoring everything else.
    fn echo_model(data: &TabularDataset, feature: usize, code_logits: &[[f64; 2]]) -> TrainedModel {
        let enc = OneHotEncoder::from_dataset(data);
        let mut theta = vec![0.0; enc.dim() * 2 + 2];
        let offset = data.alphabet_sizes()[..feature].iter().sum::<usize>();
        for (code, logits) in code_logits.iter().enumerate() {
            theta[(offset + code) * 2] = logits[0];
            theta[(offset + code) * 2 + 1] = logits[1];
        }
        let mut core = MlpModel::new_glorot(enc.dim(), &[], 0);
        core.set_theta(theta);
        TrainedModel::from_parts(
            ModelSpec::Ann(MlpSpec::default()),
            ModelCore::Mlp(core.with_encoder(enc)),
            TrainingMeta { epochs_run: 0, final_loss: None, seed: 0, loss_trace: vec![] },
        )
    }

    /// Dataset whose feature 0 is the group bit and feature 1 drives the
    /// echo model's prediction.
    fn two_feature_data(rows: &[(u16, u16, u8)]) -> TabularDataset {
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for &(f0, f1, y) in rows {
            records.extend([f0, f1]);
            labels.push(y);
        }
        TabularDataset::from_codes(records, labels, vec!["g".into(), "x".into()], 4).unwrap()
    }

    const HARD: [f64; 2] = [8.0, -8.0];

    #[test]
    fn delta_group_zero_for_identical_distributions() {
        let rows: Vec<(u16, u16, u8)> =
            (0..20).map(|i| (u16::from(i >= 10), i % 2, 0)).collect();
        let data = two_feature_data(&rows);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let (g0, g1) = group_partition(&data, &(0..20).collect::<Vec<_>>(), 0);
        assert_eq!(delta_group(&model, &data, &g0, &g1).unwrap(), 0.0);
    }

    #[test]
    fn delta_group_maximal_disparity_is_one() {
        let rows: Vec<(u16, u16, u8)> =
            (0..20).map(|i| (u16::from(i >= 10), u16::from(i >= 10), 0)).collect();
        let data = two_feature_data(&rows);
        // Group 0 rows carry f1=0 -> predicted 0; group 1 -> predicted 1.
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let (g0, g1) = group_partition(&data, &(0..20).collect::<Vec<_>>(), 0);
        assert_eq!(delta_group(&model, &data, &g0, &g1).unwrap(), 1.0);
    }

    #[test]
    fn delta_group_hand_rates_give_point_two() {
        // g0 predicts 1 on 7/10, g1 on 5/10.
        let mut rows: Vec<(u16, u16, u8)> = Vec::new();
        for i in 0..10 {
            rows.push((0, u16::from(i < 7), 0));
        }
        for i in 0..10 {
            rows.push((1, u16::from(i < 5), 0));
        }
        let data = two_feature_data(&rows);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let (g0, g1) = group_partition(&data, &(0..20).collect::<Vec<_>>(), 0);
        let v = delta_group(&model, &data, &g0, &g1).unwrap();
        assert!((v - 0.2).abs() < 1e-9, "delta_g={v}");
    }

    #[test]
    fn delta_predictive_hand_recalls_give_quarter() {
        // g0 recalls (1.0, 1.0); g1 recalls (0.5, 1.0).
        let rows = [
            (0, 0, 0),
            (0, 0, 0),
            (0, 1, 1),
            (0, 1, 1),
            (1, 1, 0),
            (1, 0, 0),
            (1, 1, 1),
            (1, 1, 1),
        ];
        let data = two_feature_data(&rows);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let (g0, g1) = group_partition(&data, &(0..8).collect::<Vec<_>>(), 0);
        let v = delta_predictive(&model, &data, &g0, &g1).unwrap();
        assert!((v - 0.25).abs() < 1e-9, "delta_p={v}");
    }

    #[test]
    fn delta_predictive_names_the_missing_class() {
        let rows = [(0, 0, 0), (0, 1, 1), (1, 1, 1), (1, 1, 1)];
        let data = two_feature_data(&rows);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let (g0, g1) = group_partition(&data, &(0..4).collect::<Vec<_>>(), 0);
        match delta_predictive(&model, &data, &g0, &g1) {
            Err(Error::MissingClassInGroup { class: 0, .. }) => {}
            other => panic!("expected MissingClassInGroup for class 0, got {other:?}"),
        }
    }

    #[test]
    fn delta_individual_three_record_hand_case() {
        // Records [0,0],[0,1],[1,1]; prediction depends on feature 0 only:
        // code 0 -> (1/2,1/2), code 1 -> (1/4,3/4).
        let data = two_feature_data(&[(0, 0, 0), (0, 1, 0), (1, 1, 0)]);
        let model = echo_model(&data, 0, &[[0.0, 0.0], [0.0, (3.0f64).ln()]]);
        // Pairs: tv 0 vs d 1/2; tv 1/4 vs d 1; tv 1/4 vs d 1/2.
        let expect = (0.5 + 0.75 + 0.25) / 3.0;
        let v = delta_individual(&model, &data, &[0, 1, 2], 10, 1).unwrap();
        assert!((v - expect).abs() < 1e-9, "delta_i={v}");
    }

    #[test]
    fn delta_individual_identical_records_constant_model_is_zero() {
        let data = two_feature_data(&[(1, 1, 0); 6]);
        let model = echo_model(&data, 0, &[[0.0, 0.0], [0.0, 0.0]]);
        let v = delta_individual(&model, &data, &[0, 1, 2, 3, 4, 5], 100, 1).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn delta_individual_all_pairs_is_permutation_invariant() {
        let data = synthesize(40, 5, 0.5, 0.5, 3, 7).unwrap();
        let model = echo_model(&data, 2, &[[0.5, -0.5], [0.0, 0.3], [-0.2, 0.8]]);
        let forward: Vec<usize> = (0..40).collect();
        let backward: Vec<usize> = (0..40).rev().collect();
        let a = delta_individual(&model, &data, &forward, 1_000_000, 1).unwrap();
        let b = delta_individual(&model, &data, &backward, 1_000_000, 9).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn delta_mia_indist_hand_counts() {
        // Members: 90/100 predicted 1. Non-members: 50/100.
        let mut rows: Vec<(u16, u16, u8)> = Vec::new();
        for i in 0..100 {
            rows.push((0, u16::from(i < 90), 0));
        }
        for i in 0..100 {
            rows.push((0, u16::from(i < 50), 0));
        }
        let data = two_feature_data(&rows);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let members: Vec<usize> = (0..100).collect();
        let nonmembers: Vec<usize> = (100..200).collect();
        let v = delta_mia_indist(&model, &data, &members, &nonmembers).unwrap();
        let expect = (51.0f64 / 11.0).ln();
        assert!((v - expect).abs() < 1e-9, "delta_mi={v} expect {expect}");
        // Swapping the sets leaves the value unchanged.
        let w = delta_mia_indist(&model, &data, &nonmembers, &members).unwrap();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn delta_mia_indist_identical_sets_are_zero() {
        let data = two_feature_data(&[(0, 0, 0), (0, 1, 1), (1, 0, 0), (1, 1, 1)]);
        let model = echo_model(&data, 1, &[HARD, [-8.0, 8.0]]);
        let v = delta_mia_indist(&model, &data, &[0, 1], &[2, 3]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn fairness_report_partition_covers_and_separates() {
        let data = synthesize(300, 6, 0.4, 0.5, 3, 3).unwrap();
        let model = echo_model(&data, 1, &[[0.4, -0.4], [0.0, 0.2], [-0.3, 0.1]]);
        let train: Vec<usize> = (0..200).collect();
        let holdout: Vec<usize> = (200..300).collect();
        let report =
            measure_fairness(&model, &data, &train, &holdout, 0, 500, 11).unwrap();
        let (g0, g1) = &report.group_partition;
        assert_eq!(g0.len() + g1.len(), train.len());
        assert!(g0.iter().all(|&i| data.record(i)[0] == 0));
        assert!(g1.iter().all(|&i| data.record(i)[0] != 0));
        assert!(report.delta_g >= 0.0 && report.delta_g <= 1.0);
        assert!(report.delta_i >= 0.0);
        assert!(report.delta_mi >= 0.0);
    }

    #[test]
    fn identical_records_have_zero_information() {
        let data = two_feature_data(&[(1, 1, 0); 8]);
        let spec = ModelSpec::Ann(MlpSpec {
            epochs: 1,
            hidden_layers: vec![],
            ..MlpSpec::default()
        });
        let est = mutual_info_records_params(&spec, &data, 4, 4, 8, 5).unwrap();
        assert_eq!(est.i_x, 0.0);
    }

    #[test]
    fn frozen_parameters_stay_under_the_noise_floor() {
        // Vanishing learning rate: parameters stay at their seeded
        // initialization, so presence is independent of the probes.
        let data = synthesize(60, 4, 0.5, 0.5, 3, 9).unwrap();
        let spec = ModelSpec::Ann(MlpSpec {
            epochs: 1,
            learning_rate: 1e-12,
            hidden_layers: vec![],
            ..MlpSpec::default()
        });
        let est = mutual_info_records_params(&spec, &data, 30, 4, 8, 5).unwrap();
        assert!(
            est.i_x <= est.noise_floor,
            "i_x={} floor={}",
            est.i_x,
            est.noise_floor
        );
    }

    #[test]
    fn micro_case_matches_exhaustive_joint_histogram() {
        // 2 records, 2 retrainings, 1 probe coordinate, hand-done plug-in
        // arithmetic with the same bias rule.
        let data = two_feature_data(&[(0, 0, 0), (1, 1, 1)]);
        let obs = MiObservations {
            // Record 0 present in retraining 0 only; record 1 in both.
            presence: vec![vec![true, false], vec![true, true]],
            // Distinct probe values: ranks 0 and 1 -> bins 0 and 1 of 2.
            probes: vec![vec![-1.0], vec![1.0]],
        };
        let est = estimate_from_observations(&data, &obs, 2).unwrap();
        // Record 0: joint {(T,bin0),(F,bin1)} -> plug-in MI = 1 bit;
        // bias = (2-1)(2-1)/(2*2*ln2); capped at H(x_0) = 1 bit.
        let bias = 1.0 / (4.0 * std::f64::consts::LN_2);
        let expect_r0 = (1.0 - bias).min(1.0);
        // Record 1: presence constant -> MI 0, bias 0 (single row).
        let expect = (expect_r0 + 0.0) / 2.0;
        assert!((est.i_x - expect).abs() < 1e-12, "i_x={} expect {expect}", est.i_x);
        assert_eq!(est.num_retrainings, 2);
        assert_eq!(est.bins, 2);
    }

    #[test]
    fn knn_family_is_rejected_for_probing() {
        let data = synthesize(40, 4, 0.5, 0.5, 3, 9).unwrap();
        let spec = ModelSpec::default_for(Family::Knn);
        assert!(mutual_info_records_params(&spec, &data, 4, 4, 8, 5).is_err());
    }

    #[test]
    fn pearson_and_spearman_on_affine_series() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_r(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_nonlinearity_separates_the_coefficients() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
        let p = pearson_r(&x, &y).unwrap();
        assert!(p > -1.0 && p < 0.0, "pearson={p}");
        assert!((spearman_r(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_matches_a_brute_force_rank_oracle() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let y = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0, 2.0, 8.0];
        // Independent rank computation: rank = #(smaller) + (#(equal)+1)/2.
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&a| {
                    let smaller = v.iter().filter(|&&b| b < a).count() as f64;
                    let equal = v.iter().filter(|&&b| b == a).count() as f64;
                    smaller + (equal + 1.0) / 2.0
                })
                .collect()
        };
        let expect = pearson_r(&rank(&x), &rank(&y)).unwrap();
        let got = spearman_r(&x, &y).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transforms() {
        let x = [0.2, 1.4, 0.9, 3.3, 2.8, 0.1, 1.9];
        let y = [5.0, 3.0, 4.0, 1.0, 9.0, 2.0, 8.0];
        let base = spearman_r(&x, &y).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v.powi(3) + 7.0).collect();
        assert!((spearman_r(&tx, &ty).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_errors() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(pearson_r(&x, &y), Err(Error::ZeroVariance(_))));
        assert!(matches!(spearman_r(&y, &x), Err(Error::ZeroVariance(_))));
    }
}
