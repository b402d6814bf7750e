//! Five classifier families with one prediction contract: every model maps
//! a discrete record to a length-2 probability vector.
//!
//! The MLP exposes its loss/gradient machinery so defended training can
//! steer it with property-derived penalty terms; the other families are
//! black boxes behind [`TrainedModel`].

mod encode;
mod forest;
mod knn;
mod mlp;
mod serialize;
mod svm;

pub use encode::OneHotEncoder;
pub use forest::RfModel;
pub use knn::KnnModel;
pub use mlp::{
    train_on_matrix, LossTrace, MlpModel, MlpTrainConfig, RegForm, RegKind, RegularizerTerm,
};
pub use serialize::{load_model, model_from_json, model_to_json, save_model};
pub use svm::SvmModel;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// The classifier families of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Ann,
    Lr,
    Knn,
    Rf,
    Svm,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Ann, Family::Lr, Family::Knn, Family::Rf, Family::Svm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ann => "ann",
            Family::Lr => "lr",
            Family::Knn => "knn",
            Family::Rf => "rf",
            Family::Svm => "svm",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Hyperparameters for the MLP family. Defaults follow the benchmark's
/// reference network: one 50-unit hidden layer, learning rate 0.001, 50
/// epochs, L2 weight 1e-7, full-batch descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    pub hidden_layers: Vec<usize>,
    /// `None` = full batch; `Some(b)` = shuffled minibatches of `b`.
    pub batch_size: Option<usize>,
    /// Multiplier on the Glorot weight range. Sigmoid units shrink signal
    /// variance layer over layer, so networks deeper than two or three
    /// hidden layers collapse to constant activations at scale 1 and need
    /// roughly 3-4 here to carry gradients end to end.
    pub init_scale: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 50,
            l2_lambda: 1e-7,
            hidden_layers: vec![50],
            batch_size: None,
            init_scale: 1.0,
        }
    }
}

/// Logistic regression: the same descent loop with no hidden layers; the
/// L2 weight is derived from the inverse regularization strength as
/// 1/(2*C*n) at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrSpec {
    pub c: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
}

impl Default for LrSpec {
    fn default() -> Self {
        Self { c: 0.01, learning_rate: 0.1, epochs: 300, batch_size: None }
    }
}

/// k-nearest-neighbor over Hamming distance between code vectors. The
/// distance exponent `p` is kept for spec fidelity; with 0/1 per-feature
/// contributions it does not change the neighbor ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnSpec {
    pub k: usize,
    pub p: u32,
}

impl Default for KnnSpec {
    fn default() -> Self {
        Self { k: 3, p: 2 }
    }
}

/// Random forest of Gini-split trees over raw integer codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfSpec {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Disable to grow every tree on the full training set.
    pub bootstrap: bool,
}

impl Default for RfSpec {
    fn default() -> Self {
        Self { n_estimators: 100, max_depth: 2, bootstrap: true }
    }
}

/// RBF-kernel SVM approximated by random Fourier features plus hinge-loss
/// subgradient descent; probabilities via logistic calibration on a held-out
/// tenth of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmSpec {
    pub c: f64,
    pub rbf_bandwidth: f64,
    pub num_random_features: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for SvmSpec {
    fn default() -> Self {
        Self { c: 0.01, rbf_bandwidth: 0.1, num_random_features: 256, learning_rate: 0.5, epochs: 300 }
    }
}

/// Family plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Ann(MlpSpec),
    Lr(LrSpec),
    Knn(KnnSpec),
    Rf(RfSpec),
    Svm(SvmSpec),
}

impl ModelSpec {
    pub fn default_for(family: Family) -> ModelSpec {
        match family {
            Family::Ann => ModelSpec::Ann(MlpSpec::default()),
            Family::Lr => ModelSpec::Lr(LrSpec::default()),
            Family::Knn => ModelSpec::Knn(KnnSpec::default()),
            Family::Rf => ModelSpec::Rf(RfSpec::default()),
            Family::Svm => ModelSpec::Svm(SvmSpec::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Ann(_) => Family::Ann,
            ModelSpec::Lr(_) => Family::Lr,
            ModelSpec::Knn(_) => Family::Knn,
            ModelSpec::Rf(_) => Family::Rf,
            ModelSpec::Svm(_) => Family::Svm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            ModelSpec::Ann(s) => {
                if s.learning_rate <= 0.0 {
                    return bad(format!("learning rate must be positive, got {}", s.learning_rate));
                }
                if s.epochs == 0 {
                    return bad("epochs must be at least 1".into());
                }
                if s.l2_lambda < 0.0 {
                    return bad("l2 weight must be nonnegative".into());
                }
                if s.hidden_layers.iter().any(|&w| w == 0) {
                    return bad("hidden widths must be at least 1".into());
                }
                if !(s.init_scale > 0.0 && s.init_scale.is_finite()) {
                    return bad(format!("init scale must be positive, got {}", s.init_scale));
                }
            }
            ModelSpec::Lr(s) => {
                if s.c <= 0.0 {
                    return bad(format!("C must be positive, got {}", s.c));
                }
                if s.learning_rate <= 0.0 || s.epochs == 0 {
                    return bad("learning rate and epochs must be positive".into());
                }
            }
            ModelSpec::Knn(s) => {
                if s.k == 0 {
                    return bad("k must be at least 1".into());
                }
            }
            ModelSpec::Rf(s) => {
                if s.n_estimators == 0 {
                    return bad("n_estimators must be at least 1".into());
                }
            }
            ModelSpec::Svm(s) => {
                if s.c <= 0.0 || s.rbf_bandwidth <= 0.0 {
                    return bad("C and bandwidth must be positive".into());
                }
                if s.num_random_features == 0 {
                    return bad("need at least one random feature".into());
                }
                if s.learning_rate <= 0.0 || s.epochs == 0 {
                    return bad("learning rate and epochs must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// A length-2 probability vector with its argmax label; ties predict 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub probs: [f64; 2],
    pub argmax_label: u8,
}

impl PredictionVector {
    pub fn from_probs(probs: [f64; 2]) -> Self {
        Self { probs, argmax_label: u8::from(probs[1] > probs[0]) }
    }
}

/// Bookkeeping from one training run. Lazy and tree families have no loss
/// trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub seed: u64,
    pub loss_trace: Vec<f64>,
}

/// Family-specific trained state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelCore {
    Mlp(MlpModel),
    Knn(KnnModel),
    Rf(RfModel),
    Svm(SvmModel),
}

/// A trained classifier with its spec and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub core: ModelCore,
    pub meta: TrainingMeta,
}

impl TrainedModel {
    pub fn from_parts(spec: ModelSpec, core: ModelCore, meta: TrainingMeta) -> Self {
        Self { spec, core, meta }
    }

    pub fn predict_proba(&self, record: &[u16]) -> PredictionVector {
        let probs = match &self.core {
            ModelCore::Mlp(m) => m.predict_record(record),
            ModelCore::Knn(m) => m.predict_record(record),
            ModelCore::Rf(m) => m.predict_record(record),
            ModelCore::Svm(m) => m.predict_record(record),
        };
        PredictionVector::from_probs(probs)
    }

    /// Predictions for the records at `indices`; the MLP path batches its
    /// matrix products.
    pub fn predict_proba_batch(
        &self,
        data: &TabularDataset,
        indices: &[usize],
    ) -> Vec<PredictionVector> {
        match &self.core {
            ModelCore::Mlp(m) => {
                let enc = m.encoder().expect("trained MLP carries an encoder");
                let x = enc.encode_batch(data, indices);
                let p = m.forward_batch(x.view());
                (0..indices.len())
                    .map(|i| PredictionVector::from_probs([p[[i, 0]], p[[i, 1]]]))
                    .collect()
            }
            _ => indices.iter().map(|&i| self.predict_proba(data.record(i))).collect(),
        }
    }

    /// Mean cross-entropy plus penalty and the flat gradient on the given
    /// records; MLP-family models only.
    pub fn loss_and_grad(
        &self,
        data: &TabularDataset,
        indices: &[usize],
        reg: &RegularizerTerm,
    ) -> Result<(f64, Vec<f64>)> {
        let ModelCore::Mlp(m) = &self.core else {
            return Err(Error::InvalidArgument(format!(
                "loss_and_grad needs an MLP-family model, got {}",
                self.spec.family().name()
            )));
        };
        let enc = m.encoder().expect("trained MLP carries an encoder");
        let x = enc.encode_batch(data, indices);
        let y: Vec<u8> = indices.iter().map(|&i| data.label(i)).collect();
        m.loss_and_grad(x.view(), &y, reg)
    }
}

/// Trains a model of the requested family.
pub fn train(spec: &ModelSpec, data: &TabularDataset, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    if data.num_records() == 0 {
        return Err(Error::Insufficient("empty training set".into()));
    }
    let n = data.num_records();
    let all: Vec<usize> = (0..n).collect();
    let meta_seed = seed;
    let (core, meta) = match spec {
        ModelSpec::Ann(s) => {
            let enc = OneHotEncoder::from_dataset(data);
            let x = enc.encode_batch(data, &all);
            let cfg = MlpTrainConfig {
                learning_rate: s.learning_rate,
                epochs: s.epochs,
                l2_lambda: s.l2_lambda,
                hidden_layers: s.hidden_layers.clone(),
                batch_size: s.batch_size,
                init_scale: s.init_scale,
            };
            let (model, trace) =
                train_on_matrix(&cfg, x.view(), data.labels(), derive_seed(seed, &[1]))?;
            let meta = meta_from_trace(trace, meta_seed);
            (ModelCore::Mlp(model.with_encoder(enc)), meta)
        }
        ModelSpec::Lr(s) => {
            let enc = OneHotEncoder::from_dataset(data);
            let x = enc.encode_batch(data, &all);
            let cfg = MlpTrainConfig {
                learning_rate: s.learning_rate,
                epochs: s.epochs,
                l2_lambda: 1.0 / (2.0 * s.c * n as f64),
                hidden_layers: vec![],
                batch_size: s.batch_size,
                init_scale: 1.0,
            };
            let (model, trace) =
                train_on_matrix(&cfg, x.view(), data.labels(), derive_seed(seed, &[2]))?;
            let meta = meta_from_trace(trace, meta_seed);
            (ModelCore::Mlp(model.with_encoder(enc)), meta)
        }
        ModelSpec::Knn(s) => {
            let model = KnnModel::fit(s, data)?;
            (ModelCore::Knn(model), lazy_meta(meta_seed))
        }
        ModelSpec::Rf(s) => {
            let model = RfModel::fit(s, data, derive_seed(seed, &[3]))?;
            (ModelCore::Rf(model), lazy_meta(meta_seed))
        }
        ModelSpec::Svm(s) => {
            let (model, trace) = SvmModel::fit(s, data, derive_seed(seed, &[4]))?;
            let meta = meta_from_trace(trace, meta_seed);
            (ModelCore::Svm(model), meta)
        }
    };
    Ok(TrainedModel { spec: spec.clone(), core, meta })
}

fn meta_from_trace(trace: Vec<f64>, seed: u64) -> TrainingMeta {
    TrainingMeta {
        epochs_run: trace.len(),
        final_loss: trace.last().copied(),
        seed,
        loss_trace: trace,
    }
}

fn lazy_meta(seed: u64) -> TrainingMeta {
    TrainingMeta { epochs_run: 0, final_loss: None, seed, loss_trace: vec![] }
}

/// Fraction of records whose argmax prediction equals the true label.
pub fn evaluate(model: &TrainedModel, data: &TabularDataset) -> f64 {
    let all: Vec<usize> = (0..data.num_records()).collect();
    evaluate_on(model, data, &all)
}

/// [`evaluate`] restricted to the records at `indices`.
pub fn evaluate_on(model: &TrainedModel, data: &TabularDataset, indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let preds = model.predict_proba_batch(data, indices);
    let correct = preds
        .iter()
        .zip(indices)
        .filter(|(p, &i)| p.argmax_label == data.label(i))
        .count();
    correct as f64 / indices.len() as f64
}

/// Dense design matrix helper used by modules that train MLPs directly.
pub fn encode_full(data: &TabularDataset) -> (OneHotEncoder, ndarray::Array2<f64>) {
    let enc = OneHotEncoder::from_dataset(data);
    let all: Vec<usize> = (0..data.num_records()).collect();
    let x = enc.encode_batch(data, &all);
    (enc, x)
}

/// Forwards a real-valued matrix through an MLP-family model, for callers
/// that already hold encoded inputs.
pub fn forward_mlp(model: &TrainedModel, x: ArrayView2<'_, f64>) -> Result<ndarray::Array2<f64>> {
    let ModelCore::Mlp(m) = &model.core else {
        return Err(Error::InvalidArgument("not an MLP-family model".into()));
    };
    Ok(m.forward_batch(x))
}
