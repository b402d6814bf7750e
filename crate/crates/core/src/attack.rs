//! The shadow-model membership-inference pipeline.
//!
//! A shadow model trained on an IN set labels its own training membership:
//! its prediction vectors on IN and OUT records, each with the record's true
//! class, form the attack dataset. The attack model is a small MLP over
//! those 4-dimensional rows; it is scored against the target model on a
//! balanced member/non-member evaluation set, so chance is 0.5.

use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{ExperimentSplit, TabularDataset};
use crate::error::{Error, Result};
use crate::models::{
    train, train_on_matrix, MlpModel, MlpSpec, MlpTrainConfig, ModelSpec, PredictionVector,
    TrainedModel,
};
use crate::seed::{derive_seed, rng_for};

/// One attack-training row: shadow prediction vector, one-hot true class,
/// and the membership bit (1 = IN).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackExample {
    pub prediction: [f64; 2],
    pub class_onehot: [f64; 2],
    pub membership: u8,
}

impl AttackExample {
    pub fn features(&self) -> [f64; 4] {
        [self.prediction[0], self.prediction[1], self.class_onehot[0], self.class_onehot[1]]
    }
}

fn class_onehot(y: u8) -> [f64; 2] {
    if y == 0 { [1.0, 0.0] } else { [0.0, 1.0] }
}

/// Binary member/non-member classifier over [`AttackExample`] features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    core: MlpModel,
}

impl AttackModel {
    /// Probability vector over (non-member, member).
    pub fn predict(&self, features: [f64; 4]) -> PredictionVector {
        let x = Array2::from_shape_vec((1, 4), features.to_vec()).unwrap();
        let p = self.core.forward_batch(x.view());
        PredictionVector::from_probs([p[[0, 0]], p[[0, 1]]])
    }

    fn predict_batch(&self, rows: &[[f64; 4]]) -> Vec<PredictionVector> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), 4), flat).unwrap();
        let p = self.core.forward_batch(x.view());
        (0..rows.len()).map(|i| PredictionVector::from_probs([p[[i, 0]], p[[i, 1]]])).collect()
    }

    /// Test-only constructor for hand-crafted attack weights.
    pub fn from_core(core: MlpModel) -> Self {
        Self { core }
    }
}

/// Queries the shadow on its IN and OUT records and emits one labeled
/// example per record, shuffled by `seed`.
pub fn build_attack_dataset(
    shadow: &TrainedModel,
    data: &TabularDataset,
    shadow_in: &[usize],
    shadow_out: &[usize],
    seed: u64,
) -> Result<Vec<AttackExample>> {
    let in_set: HashSet<usize> = shadow_in.iter().copied().collect();
    if shadow_out.iter().any(|i| in_set.contains(i)) {
        return Err(Error::InvalidArgument(
            "shadow IN and OUT sets overlap".into(),
        ));
    }
    let mut examples = Vec::with_capacity(shadow_in.len() + shadow_out.len());
    for (indices, membership) in [(shadow_in, 1u8), (shadow_out, 0u8)] {
        let preds = shadow.predict_proba_batch(data, indices);
        for (&i, pred) in indices.iter().zip(preds) {
            let y = data.label(i);
            examples.push(AttackExample {
                prediction: pred.probs,
                class_onehot: class_onehot(y),
                membership,
            });
        }
    }
    let mut rng = rng_for(seed, &[0x4154_4b44, examples.len() as u64]);
    examples.shuffle(&mut rng);
    Ok(examples)
}

/// Attack-model hyperparameters: the reference MLP architecture with the
/// step-size and minibatch knobs turned up. The member rule is an
/// interaction of prediction and class ("confidence on the true class"),
/// which the hidden layer only finds at a much larger step than one-hot
/// record encodings need.
pub fn attack_train_config() -> MlpTrainConfig {
    let reference = MlpSpec::default();
    MlpTrainConfig {
        learning_rate: 0.1,
        epochs: 150,
        l2_lambda: reference.l2_lambda,
        hidden_layers: reference.hidden_layers,
        batch_size: Some(32),
        init_scale: reference.init_scale,
    }
}

/// Trains the membership classifier on attack examples.
pub fn train_attack(attack_data: &[AttackExample], seed: u64) -> Result<AttackModel> {
    let members = attack_data.iter().filter(|e| e.membership == 1).count();
    if members == 0 || members == attack_data.len() {
        return Err(Error::Insufficient(
            "attack data needs both member and non-member examples".into(),
        ));
    }
    let flat: Vec<f64> = attack_data.iter().flat_map(|e| e.features()).collect();
    let x = Array2::from_shape_vec((attack_data.len(), 4), flat).unwrap();
    let y: Vec<u8> = attack_data.iter().map(|e| e.membership).collect();
    let (core, _) =
        train_on_matrix(&attack_train_config(), x.view(), &y, derive_seed(seed, &[0xA7]))?;
    Ok(AttackModel { core })
}

/// Fraction of attack examples whose predicted membership matches.
pub fn attack_accuracy(attack: &AttackModel, examples: &[AttackExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let rows: Vec<[f64; 4]> = examples.iter().map(|e| e.features()).collect();
    let preds = attack.predict_batch(&rows);
    let hits = preds
        .iter()
        .zip(examples)
        .filter(|(p, e)| p.argmax_label == e.membership)
        .count();
    hits as f64 / examples.len() as f64
}

/// Scores the attack against the target on the balanced evaluation sets.
pub fn evaluate_mia(
    attack: &AttackModel,
    target: &TrainedModel,
    split: &ExperimentSplit,
    data: &TabularDataset,
) -> Result<f64> {
    if split.attack_eval_members.is_empty() || split.attack_eval_nonmembers.is_empty() {
        return Err(Error::Insufficient("empty attack evaluation set".into()));
    }
    let shadow_pool: HashSet<usize> =
        split.shadow_in.iter().chain(&split.shadow_out).copied().collect();
    if split
        .attack_eval_members
        .iter()
        .chain(&split.attack_eval_nonmembers)
        .any(|i| shadow_pool.contains(i))
    {
        return Err(Error::InvalidArgument(
            "evaluation records leak into the shadow pool".into(),
        ));
    }

    let mut total = 0usize;
    let mut hits = 0usize;
    for (indices, membership) in
        [(&split.attack_eval_members, 1u8), (&split.attack_eval_nonmembers, 0u8)]
    {
        let target_preds = target.predict_proba_batch(data, indices);
        let rows: Vec<[f64; 4]> = indices
            .iter()
            .zip(&target_preds)
            .map(|(&i, p)| {
                let y = data.label(i);
                let onehot = class_onehot(y);
                [p.probs[0], p.probs[1], onehot[0], onehot[1]]
            })
            .collect();
        for p in attack.predict_batch(&rows) {
            total += 1;
            hits += usize::from(p.argmax_label == membership);
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Full single-shadow pipeline: train a shadow of `shadow_spec` on the IN
/// set, build the attack dataset, train the attack, and score it against
/// `target`.
pub fn run_attack_pipeline(
    target: &TrainedModel,
    shadow_spec: &ModelSpec,
    split: &ExperimentSplit,
    data: &TabularDataset,
    seed: u64,
) -> Result<f64> {
    let shadow_data = data.subset(&split.shadow_in)?;
    let shadow = train(shadow_spec, &shadow_data, derive_seed(seed, &[0x5348]))?;
    let examples =
        build_attack_dataset(&shadow, data, &split.shadow_in, &split.shadow_out, seed)?;
    let attack = train_attack(&examples, seed)?;
    evaluate_mia(&attack, target, split, data)
}

/// One attack dataset per shadow spec, each from its own shadow trained on
/// the split's IN set with a spec-indexed seed.
pub fn per_family_attack_datasets(
    shadow_specs: &[ModelSpec],
    split: &ExperimentSplit,
    data: &TabularDataset,
    seed: u64,
) -> Result<Vec<Vec<AttackExample>>> {
    if shadow_specs.is_empty() {
        return Err(Error::InvalidArgument("need at least one shadow spec".into()));
    }
    let shadow_data = data.subset(&split.shadow_in)?;
    let mut sets = Vec::with_capacity(shadow_specs.len());
    for (s, spec) in shadow_specs.iter().enumerate() {
        let shadow = train(spec, &shadow_data, derive_seed(seed, &[0x5348, s as u64]))?;
        sets.push(build_attack_dataset(
            &shadow,
            data,
            &split.shadow_in,
            &split.shadow_out,
            derive_seed(seed, &[0x4144, s as u64]),
        )?);
    }
    Ok(sets)
}

/// Trains one attack model on the shuffled union of the per-family example
/// sets.
pub fn train_union_attack(sets: &[Vec<AttackExample>], seed: u64) -> Result<AttackModel> {
    let mut union: Vec<AttackExample> = sets.iter().flatten().cloned().collect();
    let mut rng = rng_for(seed, &[0x4f56_41, union.len() as u64]);
    union.shuffle(&mut rng);
    train_attack(&union, seed)
}

/// Table-2 "All" mode: one shadow per family over the same IN/OUT split,
/// one attack model on the union of their example sets.
pub fn one_vs_all_attack(
    target: &TrainedModel,
    shadow_specs: &[ModelSpec],
    split: &ExperimentSplit,
    data: &TabularDataset,
    seed: u64,
) -> Result<f64> {
    let sets = per_family_attack_datasets(shadow_specs, split, data, seed)?;
    let attack = train_union_attack(&sets, seed)?;
    evaluate_mia(&attack, target, split, data)
}

/// Writes attack examples as CSV rows (p0, p1, y0, y1, membership).
pub fn write_attack_csv(examples: &[AttackExample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p0", "p1", "y0", "y1", "membership"])?;
    for e in examples {
        w.write_record(&[
            format!("{}", e.prediction[0]),
            format!("{}", e.prediction[1]),
            format!("{}", e.class_onehot[0]),
            format!("{}", e.class_onehot[1]),
            e.membership.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
