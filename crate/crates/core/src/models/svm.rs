//! RBF-kernel SVM via random Fourier features, hinge-loss subgradient
//! descent, and logistic calibration of the margin.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;

use super::encode::OneHotEncoder;
use super::SvmSpec;
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::rng_for;

const CALIBRATION_SHARE: f64 = 0.1;
const CALIBRATION_STEPS: usize = 500;

/// Approximates exp(-gamma * ||x - x'||^2) with the feature map
/// z(x) = sqrt(2/m) * cos(x Omega + b), Omega ~ N(0, 2 gamma), b ~ U[0, 2pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    encoder: OneHotEncoder,
    omega: Vec<f64>,
    phase: Vec<f64>,
    num_features: usize,
    weights: Vec<f64>,
    bias: f64,
    /// Logistic calibration: P(y=1 | margin) = sigmoid(a * margin + c).
    platt: (f64, f64),
}

impl SvmModel {
    pub fn fit(
        spec: &SvmSpec,
        data: &TabularDataset,
        seed: u64,
    ) -> Result<(Self, Vec<f64>)> {
        let n = data.num_records();
        if n < 2 {
            return Err(Error::Insufficient("SVM training needs at least 2 records".into()));
        }
        let encoder = OneHotEncoder::from_dataset(data);
        let dim = encoder.dim();
        let m = spec.num_random_features;

        let mut rng = rng_for(seed, &[0x5356_4d30]);
        let gauss = Normal::new(0.0, (2.0 * spec.rbf_bandwidth).sqrt())
            .map_err(|e| Error::InvalidSpec(format!("bad bandwidth: {e}")))?;
        let omega: Vec<f64> = (0..dim * m).map(|_| gauss.sample(&mut rng)).collect();
        let phase: Vec<f64> =
            (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();

        let mut model = Self {
            encoder,
            omega,
            phase,
            num_features: m,
            weights: vec![0.0; m],
            bias: 0.0,
            platt: (1.0, 0.0),
        };

        // Hold out a slice for calibration so the margin-to-probability map
        // is not fit on the same rows that shaped the margins.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_cal = ((n as f64 * CALIBRATION_SHARE).round() as usize).min(n - 1);
        let (cal_rows, fit_rows) = order.split_at(n_cal);
        let fit_rows = fit_rows.to_vec();
        let cal_rows = if cal_rows.is_empty() { fit_rows.clone() } else { cal_rows.to_vec() };

        let z = model.features_for(data, &fit_rows);
        let y_pm: Vec<f64> =
            fit_rows.iter().map(|&i| if data.label(i) == 1 { 1.0 } else { -1.0 }).collect();
        let lambda = 1.0 / (spec.c * fit_rows.len() as f64);

        let mut trace = Vec::with_capacity(spec.epochs);
        for epoch in 0..spec.epochs {
            let margins = z.dot(&Array1::from_vec(model.weights.clone())) + model.bias;
            let mut g_w = vec![0.0; m];
            let mut g_b = 0.0;
            let mut hinge_sum = 0.0;
            let inv = 1.0 / fit_rows.len() as f64;
            for (i, (&yi, &mi)) in y_pm.iter().zip(margins.iter()).enumerate() {
                let viol = 1.0 - yi * mi;
                if viol > 0.0 {
                    hinge_sum += viol;
                    for (gw, &zv) in g_w.iter_mut().zip(z.row(i)) {
                        *gw -= yi * zv * inv;
                    }
                    g_b -= yi * inv;
                }
            }
            let mut loss = hinge_sum * inv;
            for (gw, &w) in g_w.iter_mut().zip(&model.weights) {
                *gw += lambda * w;
                loss += 0.5 * lambda * w * w;
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, detail: "hinge objective".into() });
            }
            for (w, gw) in model.weights.iter_mut().zip(&g_w) {
                *w -= spec.learning_rate * gw;
            }
            model.bias -= spec.learning_rate * g_b;
            trace.push(loss);
        }

        model.calibrate(data, &cal_rows);
        Ok((model, trace))
    }

    /// Feature-map rows for the records at `indices`.
    fn features_for(&self, data: &TabularDataset, indices: &[usize]) -> Array2<f64> {
        let x = self.encoder.encode_batch(data, indices);
        self.map_features(x.view())
    }

    fn map_features(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let dim = self.encoder.dim();
        let omega = ArrayView2::from_shape((dim, self.num_features), &self.omega).unwrap();
        let mut z = x.dot(&omega);
        let scale = (2.0 / self.num_features as f64).sqrt();
        for mut row in z.axis_iter_mut(Axis(0)) {
            for (v, &p) in row.iter_mut().zip(&self.phase) {
                *v = scale * (*v + p).cos();
            }
        }
        z
    }

    fn margin_rows(&self, data: &TabularDataset, indices: &[usize]) -> Vec<f64> {
        let z = self.features_for(data, indices);
        let w = Array1::from_vec(self.weights.clone());
        (z.dot(&w) + self.bias).to_vec()
    }

    /// Fits sigmoid(a * margin + c) to the held-out labels by gradient
    /// descent on the logistic loss.
    fn calibrate(&mut self, data: &TabularDataset, rows: &[usize]) {
        let margins = self.margin_rows(data, rows);
        let ys: Vec<f64> = rows.iter().map(|&i| f64::from(data.label(i))).collect();
        let (mut a, mut c) = (1.0, 0.0);
        let n = rows.len() as f64;
        for _ in 0..CALIBRATION_STEPS {
            let mut ga = 0.0;
            let mut gc = 0.0;
            for (&mi, &yi) in margins.iter().zip(&ys) {
                let p = sigmoid(a * mi + c);
                ga += (p - yi) * mi / n;
                gc += (p - yi) / n;
            }
            a -= 0.1 * ga;
            c -= 0.1 * gc;
        }
        self.platt = (a, c);
    }

    pub fn predict_record(&self, record: &[u16]) -> [f64; 2] {
        let mut x = Array2::zeros((1, self.encoder.dim()));
        self.encoder.encode_into(record, x.row_mut(0).into_slice().unwrap());
        let z = self.map_features(x.view());
        let margin: f64 = z
            .row(0)
            .iter()
            .zip(&self.weights)
            .map(|(zv, w)| zv * w)
            .sum::<f64>()
            + self.bias;
        let (a, c) = self.platt;
        let p1 = sigmoid(a * margin + c);
        [1.0 - p1, p1]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;

    #[test]
    fn separable_data_is_learned() {
        // Labels follow the signal block; a mild spec must beat chance
        // comfortably.
        let data = synthesize(400, 6, 0.5, 0.3, 4, 3).unwrap();
        let spec = SvmSpec { c: 1.0, ..SvmSpec::default() };
        let (model, trace) = SvmModel::fit(&spec, &data, 7).unwrap();
        let correct = (0..data.num_records())
            .filter(|&i| {
                let p = model.predict_record(data.record(i));
                u8::from(p[1] > p[0]) == data.label(i)
            })
            .count();
        let acc = correct as f64 / data.num_records() as f64;
        assert!(acc > 0.65, "training accuracy {acc}");
        assert!(trace.first().unwrap() >= trace.last().unwrap());
    }

    #[test]
    fn probabilities_are_calibrated_vectors() {
        let data = synthesize(200, 4, 0.5, 0.5, 4, 1).unwrap();
        let (model, _) = SvmModel::fit(&SvmSpec::default(), &data, 2).unwrap();
        for i in 0..20 {
            let p = model.predict_record(data.record(i));
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let data = synthesize(200, 4, 0.5, 0.5, 4, 1).unwrap();
        let (a, _) = SvmModel::fit(&SvmSpec::default(), &data, 11).unwrap();
        let (b, _) = SvmModel::fit(&SvmSpec::default(), &data, 11).unwrap();
        assert_eq!(a, b);
    }
}
