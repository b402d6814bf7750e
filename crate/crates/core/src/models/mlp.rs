//! Multilayer perceptron with sigmoid hidden units, softmax output and
//! pluggable penalty terms on the flat parameter vector.
//!
//! The same machinery trains logistic regression (no hidden layers) and the
//! membership-attack classifier (real-valued inputs, no encoder). Defended
//! training reuses [`MlpModel::sgd_epoch`] so a defense run with the penalty
//! disabled reproduces plain training exactly.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::OneHotEncoder;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Penalty selectable during training. The property kinds differ only in
/// where their scalar `r` comes from; the math depends on `form` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    None,
    L1,
    L2,
    GroupFair,
    PredFair,
    IndivFair,
    MutualInfo,
}

impl RegKind {
    pub const ALL: [RegKind; 7] = [
        RegKind::None,
        RegKind::L1,
        RegKind::L2,
        RegKind::GroupFair,
        RegKind::PredFair,
        RegKind::IndivFair,
        RegKind::MutualInfo,
    ];

    /// Kinds whose `r` is refreshed from a measured model property.
    pub fn is_property(self) -> bool {
        matches!(
            self,
            RegKind::GroupFair | RegKind::PredFair | RegKind::IndivFair | RegKind::MutualInfo
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
            RegKind::GroupFair => "group_fair",
            RegKind::PredFair => "pred_fair",
            RegKind::IndivFair => "indiv_fair",
            RegKind::MutualInfo => "mutual_info",
        }
    }

    pub fn from_name(name: &str) -> Option<RegKind> {
        RegKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Functional form of the property-scaled penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegForm {
    /// lambda * e^r * sum_j |theta_j|
    AbsTimesExpR,
    /// lambda * r * sum_j theta_j^2
    SqTimesR,
}

/// A penalty term with its current property value `r`. `r` is treated as a
/// constant within a gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerTerm {
    pub kind: RegKind,
    pub lambda: f64,
    pub current_r: f64,
    pub form: RegForm,
}

impl RegularizerTerm {
    pub fn none() -> Self {
        Self { kind: RegKind::None, lambda: 0.0, current_r: 0.0, form: RegForm::AbsTimesExpR }
    }

    pub fn l1(lambda: f64) -> Self {
        Self { kind: RegKind::L1, lambda, current_r: 0.0, form: RegForm::AbsTimesExpR }
    }

    pub fn l2(lambda: f64) -> Self {
        Self { kind: RegKind::L2, lambda, current_r: 0.0, form: RegForm::AbsTimesExpR }
    }

    pub fn property(kind: RegKind, lambda: f64, form: RegForm) -> Result<Self> {
        if !kind.is_property() {
            return Err(Error::InvalidArgument(format!(
                "{} is not a property-driven regularizer",
                kind.name()
            )));
        }
        Ok(Self { kind, lambda, current_r: 0.0, form })
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidArgument("regularizer weight must be nonnegative".into()));
        }
        if self.kind.is_property() && self.current_r < 0.0 {
            return Err(Error::InvalidArgument(
                "property regularizer value must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.current_r = r;
        self
    }

    /// Penalty value at `theta`. `L1` pins r to 0; `L2` ignores the form.
    pub fn penalty(&self, theta: &[f64]) -> f64 {
        match self.kind {
            RegKind::None => 0.0,
            RegKind::L1 => self.lambda * theta.iter().map(|t| t.abs()).sum::<f64>(),
            RegKind::L2 => self.lambda * theta.iter().map(|t| t * t).sum::<f64>(),
            _ => match self.form {
                RegForm::AbsTimesExpR => {
                    self.lambda
                        * self.current_r.exp()
                        * theta.iter().map(|t| t.abs()).sum::<f64>()
                }
                RegForm::SqTimesR => {
                    self.lambda * self.current_r * theta.iter().map(|t| t * t).sum::<f64>()
                }
            },
        }
    }

    /// Adds the penalty subgradient to `grad`, with sign(0) = 0.
    pub fn add_subgradient(&self, theta: &[f64], grad: &mut [f64]) {
        match self.kind {
            RegKind::None => {}
            RegKind::L1 => {
                for (g, t) in grad.iter_mut().zip(theta) {
                    *g += self.lambda * t.signum_or_zero();
                }
            }
            RegKind::L2 => {
                for (g, t) in grad.iter_mut().zip(theta) {
                    *g += 2.0 * self.lambda * t;
                }
            }
            _ => match self.form {
                RegForm::AbsTimesExpR => {
                    let scale = self.lambda * self.current_r.exp();
                    for (g, t) in grad.iter_mut().zip(theta) {
                        *g += scale * t.signum_or_zero();
                    }
                }
                RegForm::SqTimesR => {
                    let scale = 2.0 * self.lambda * self.current_r;
                    for (g, t) in grad.iter_mut().zip(theta) {
                        *g += scale * t;
                    }
                }
            },
        }
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Feedforward network over layer sizes `dims = [input, hidden.., 2]`,
/// parameters stored flat as per-layer row-major weights then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub(crate) encoder: Option<OneHotEncoder>,
    dims: Vec<usize>,
    theta: Vec<f64>,
}

/// Per-epoch mean training losses, index = epoch.
pub type LossTrace = Vec<f64>;

/// Training knobs shared by the MLP and LR families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    pub hidden_layers: Vec<usize>,
    /// `None` trains full-batch (the deterministic default); `Some(b)`
    /// shuffles each epoch into batches of `b`.
    pub batch_size: Option<usize>,
    /// Multiplier on the Glorot weight range; see [`crate::models::MlpSpec`].
    pub init_scale: f64,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new_glorot(input_dim: usize, hidden_layers: &[usize], seed: u64) -> Self {
        Self::new_glorot_scaled(input_dim, hidden_layers, 1.0, seed)
    }

    /// Glorot-uniform weights with the range multiplied by `scale`.
    pub fn new_glorot_scaled(
        input_dim: usize,
        hidden_layers: &[usize],
        scale: f64,
        seed: u64,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden_layers.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden_layers);
        dims.push(2);
        let mut theta = Vec::new();
        let mut rng = rng_for(seed, &[0x4d4c_5030]);
        for t in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[t], dims[t + 1]);
            let lim = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            theta.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-lim..lim)));
            theta.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Self { encoder: None, dims, theta }
    }

    pub fn with_encoder(mut self, encoder: OneHotEncoder) -> Self {
        self.encoder = Some(encoder);
        self
    }

    pub fn encoder(&self) -> Option<&OneHotEncoder> {
        self.encoder.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) {
        assert_eq!(theta.len(), self.theta.len());
        self.theta = theta;
    }

    fn layer(&self, t: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let (w_off, b_off, fan_in, fan_out) = self.layer_offsets(t);
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.theta[w_off..b_off]).unwrap();
        (w, &self.theta[b_off..b_off + fan_out])
    }

    fn layer_offsets(&self, t: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for s in 0..t {
            off += self.dims[s] * self.dims[s + 1] + self.dims[s + 1];
        }
        let (fan_in, fan_out) = (self.dims[t], self.dims[t + 1]);
        (off, off + fan_in * fan_out, fan_in, fan_out)
    }

    /// Class-probability rows for a dense input batch.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for t in 0..self.num_layers() {
            let (w, b) = self.layer(t);
            let mut z = a.dot(&w);
            for mut row in z.axis_iter_mut(Axis(0)) {
                for (v, bias) in row.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            a = if t + 1 < self.num_layers() { z.mapv(sigmoid) } else { softmax_rows(&z) };
        }
        a
    }

    /// Probabilities for one discrete record; requires an encoder.
    pub fn predict_record(&self, record: &[u16]) -> [f64; 2] {
        let enc = self.encoder.as_ref().expect("model has no encoder for discrete records");
        let mut x = Array2::zeros((1, enc.dim()));
        enc.encode_into(record, x.row_mut(0).into_slice().unwrap());
        let p = self.forward_batch(x.view());
        [p[[0, 0]], p[[0, 1]]]
    }

    /// Mean cross-entropy plus penalty, and the aligned flat gradient.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[u8],
        reg: &RegularizerTerm,
    ) -> Result<(f64, Vec<f64>)> {
        let n = y.len();
        if n == 0 || x.nrows() != n {
            return Err(Error::InvalidArgument(format!(
                "batch of {} rows with {} labels",
                x.nrows(),
                n
            )));
        }
        if x.ncols() != self.dims[0] {
            return Err(Error::InvalidArgument(format!(
                "input width {} does not match model input {}",
                x.ncols(),
                self.dims[0]
            )));
        }

        // Forward, keeping activations for backprop.
        let layers = self.num_layers();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut a = x.to_owned();
        for t in 0..layers {
            let (w, b) = self.layer(t);
            let mut z = a.dot(&w);
            for mut row in z.axis_iter_mut(Axis(0)) {
                for (v, bias) in row.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            if t + 1 < layers {
                let h = z.mapv(sigmoid);
                acts.push(a);
                a = h;
            } else {
                acts.push(a);
                a = z; // logits; softmax folded into the loss below
            }
        }
        let logits = a;
        let mut data_loss = 0.0;
        let mut delta = Array2::<f64>::zeros(logits.raw_dim());
        for i in 0..n {
            let (z0, z1) = (logits[[i, 0]], logits[[i, 1]]);
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            let yi = y[i] as usize;
            data_loss += lse - logits[[i, yi]];
            let p0 = (z0 - lse).exp();
            delta[[i, 0]] = (p0 - f64::from(u8::from(y[i] == 0))) / n as f64;
            delta[[i, 1]] = ((1.0 - p0) - f64::from(u8::from(y[i] == 1))) / n as f64;
        }
        data_loss /= n as f64;

        let mut grad = vec![0.0; self.theta.len()];
        for t in (0..layers).rev() {
            let (w_off, b_off, fan_in, fan_out) = self.layer_offsets(t);
            let a_prev = &acts[t];
            let gw = a_prev.t().dot(&delta);
            grad[w_off..b_off].copy_from_slice(gw.as_slice().unwrap());
            let gb = delta.sum_axis(Axis(0));
            grad[b_off..b_off + fan_out].copy_from_slice(gb.as_slice().unwrap());
            if t > 0 {
                let w = ArrayView2::from_shape(
                    (fan_in, fan_out),
                    &self.theta[w_off..b_off],
                )
                .unwrap();
                let mut up = delta.dot(&w.t());
                // d sigmoid = a (1 - a) on the producing layer's output.
                up.zip_mut_with(a_prev, |u, &av| *u *= av * (1.0 - av));
                delta = up;
            }
        }

        let loss = data_loss + reg.penalty(&self.theta);
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        reg.add_subgradient(&self.theta, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok((loss, grad))
    }

    /// One training epoch; returns the mean pre-step loss over batches.
    ///
    /// Full-batch when `batch_size` is `None`; otherwise the row order is
    /// reshuffled from `rng` and consumed in chunks.
    pub fn sgd_epoch(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: &[u8],
        learning_rate: f64,
        batch_size: Option<usize>,
        reg: &RegularizerTerm,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let n = y.len();
        match batch_size {
            None => {
                let (loss, grad) = self.loss_and_grad(x, y, reg)?;
                self.step(&grad, learning_rate);
                Ok(loss)
            }
            Some(b) => {
                let b = b.max(1);
                let mut order: Vec<usize> = (0..n).collect();
                use rand::seq::SliceRandom;
                order.shuffle(rng);
                let mut acc = 0.0;
                for chunk in order.chunks(b) {
                    let xb = x.select(Axis(0), chunk);
                    let yb: Vec<u8> = chunk.iter().map(|&i| y[i]).collect();
                    let (loss, grad) = self.loss_and_grad(xb.view(), &yb, reg)?;
                    self.step(&grad, learning_rate);
                    acc += loss * chunk.len() as f64;
                }
                Ok(acc / n as f64)
            }
        }
    }

    fn step(&mut self, grad: &[f64], learning_rate: f64) {
        for (t, g) in self.theta.iter_mut().zip(grad) {
            *t -= learning_rate * g;
        }
    }
}

/// Trains on a dense real-valued matrix; shared by the MLP and LR families
/// and the attack classifier.
pub fn train_on_matrix(
    cfg: &MlpTrainConfig,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    seed: u64,
) -> Result<(MlpModel, LossTrace)> {
    if y.is_empty() {
        return Err(Error::Insufficient("empty training batch".into()));
    }
    let mut model =
        MlpModel::new_glorot_scaled(x.ncols(), &cfg.hidden_layers, cfg.init_scale, seed);
    let reg = RegularizerTerm::l2(cfg.l2_lambda);
    let mut rng = rng_for(seed, &[0x4d4c_5031]);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss = model
            .sgd_epoch(x, y, cfg.learning_rate, cfg.batch_size, &reg, &mut rng)
            .map_err(|e| match e {
                Error::NonFinite(detail) => Error::NonFiniteLoss { epoch, detail },
                other => other,
            })?;
        trace.push(loss);
    }
    Ok((model, trace))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
