//! Binary labeling by two-component Gaussian mixture clustering.

use rand::Rng;

use super::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::rng_for;

const MAX_ITERS: usize = 200;
const REL_TOL: f64 = 1e-6;
const VAR_FLOOR: f64 = 1e-6;

/// Replaces the labels with the argmax-responsibility component of a
/// two-component diagonal Gaussian mixture fit by EM on the records'
/// real-valued codes. Component order, and hence the 0/1 assignment, depends
/// on the seeded initialization; cluster identity is meaningful only up to a
/// global swap.
pub fn gmm_binary_labels(data: &TabularDataset, seed: u64) -> Result<TabularDataset> {
    let n = data.num_records();
    let d = data.num_features();
    if n < 4 {
        return Err(Error::Insufficient(format!("mixture fit needs n >= 4, got {n}")));
    }
    let first = data.record(0);
    if (1..n).all(|i| data.record(i) == first) {
        return Err(Error::DegenerateCovariance("all records identical".into()));
    }

    let x: Vec<f64> = (0..n)
        .flat_map(|i| data.record(i).iter().map(|&v| v as f64))
        .collect();

    // Init: two distinct records as means, global column variances, equal
    // mixing weights.
    let mut rng = rng_for(seed, &[0x474d_4d32, n as u64]);
    let i0 = rng.gen_range(0..n);
    let i1 = loop {
        let i = rng.gen_range(0..n);
        if data.record(i) != data.record(i0) {
            break i;
        }
    };
    let mut means = [row(&x, i0, d).to_vec(), row(&x, i1, d).to_vec()];
    let global_var = column_variances(&x, n, d);
    let mut vars = [global_var.clone(), global_var];
    let mut weights = [0.5f64, 0.5];

    let mut resp = vec![0.5f64; n]; // responsibility of component 1
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..MAX_ITERS {
        // E-step in log space.
        let mut ll = 0.0;
        for i in 0..n {
            let xi = row(&x, i, d);
            let l0 = weights[0].ln() + log_gauss(xi, &means[0], &vars[0]);
            let l1 = weights[1].ln() + log_gauss(xi, &means[1], &vars[1]);
            let m = l0.max(l1);
            let z = (l0 - m).exp() + (l1 - m).exp();
            ll += m + z.ln();
            resp[i] = (l1 - m).exp() / z;
        }

        // M-step.
        let r1: f64 = resp.iter().sum();
        let r0 = n as f64 - r1;
        if r0 < 1e-9 || r1 < 1e-9 {
            return Err(Error::DegenerateCovariance("a component collapsed to zero mass".into()));
        }
        weights = [r0 / n as f64, r1 / n as f64];
        for k in 0..2 {
            let rk = if k == 0 { r0 } else { r1 };
            let gamma = |i: usize| if k == 0 { 1.0 - resp[i] } else { resp[i] };
            for j in 0..d {
                let mu = (0..n).map(|i| gamma(i) * x[i * d + j]).sum::<f64>() / rk;
                let var = (0..n)
                    .map(|i| {
                        let e = x[i * d + j] - mu;
                        gamma(i) * e * e
                    })
                    .sum::<f64>()
                    / rk;
                means[k][j] = mu;
                vars[k][j] = var.max(VAR_FLOOR);
            }
        }

        if prev_ll.is_finite() && (ll - prev_ll).abs() < REL_TOL * prev_ll.abs().max(1.0) {
            break;
        }
        prev_ll = ll;
    }

    let labels: Vec<u8> = resp.iter().map(|&r| u8::from(r > 0.5)).collect();
    data.with_labels(labels)
}

fn row(x: &[f64], i: usize, d: usize) -> &[f64] {
    &x[i * d..(i + 1) * d]
}

fn column_variances(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let mean = (0..n).map(|i| x[i * d + j]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (x[i * d + j] - mean).powi(2)).sum::<f64>() / n as f64;
            var.max(VAR_FLOOR)
        })
        .collect()
}

fn log_gauss(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.len() {
        let e = x[j] - mean[j];
        acc += -0.5 * ((2.0 * std::f64::consts::PI * var[j]).ln() + e * e / var[j]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TabularDataset;
    use rand::Rng;
    use statrs::distribution::Normal;

    fn agreement_up_to_swap(labels: &[u8], truth: &[u8]) -> f64 {
        let same = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
        let n = labels.len();
        same.max(n - same) as f64 / n as f64
    }

    #[test]
    fn separated_clouds_match_exactly() {
        // Two clouds offset by 10 in every coordinate with +-1 jitter.
        let mut rng = crate::seed::rng_for(5, &[1]);
        let d = 3;
        let mut records = Vec::new();
        let mut truth = Vec::new();
        for i in 0..200 {
            let base: u16 = if i < 100 { 1 } else { 11 };
            truth.push(u8::from(i >= 100));
            for _ in 0..d {
                records.push(base + rng.gen_range(0..2) as u16);
            }
        }
        let data = TabularDataset::from_codes(
            records,
            vec![0; 200],
            (0..d).map(|j| format!("f{j}")).collect(),
            16,
        )
        .unwrap();
        let out = gmm_binary_labels(&data, 9).unwrap();
        assert_eq!(agreement_up_to_swap(out.labels(), &truth), 1.0);
    }

    #[test]
    fn single_repeated_record_is_degenerate() {
        let data = TabularDataset::from_codes(
            vec![3, 3, 3, 3, 3, 3, 3, 3],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
            10,
        )
        .unwrap();
        assert!(matches!(
            gmm_binary_labels(&data, 1),
            Err(Error::DegenerateCovariance(_))
        ));
    }

    #[test]
    fn three_sigma_mixture_recovers_most_labels() {
        // Components at distance 3 sigma along one axis (sigma = 2, offset 6),
        // quantized to integer codes.
        use rand::distributions::Distribution;
        let gauss = Normal::new(0.0, 2.0).unwrap();
        let mut rng = crate::seed::rng_for(11, &[2]);
        let n = 2000;
        let mut records = Vec::new();
        let mut truth = Vec::new();
        for i in 0..n {
            let c = u8::from(i % 2 == 1);
            truth.push(c);
            let x0 = gauss.sample(&mut rng) + if c == 1 { 6.0 } else { 0.0 } + 12.0;
            let x1 = gauss.sample(&mut rng) + 12.0;
            records.push(x0.round().clamp(0.0, 40.0) as u16);
            records.push(x1.round().clamp(0.0, 40.0) as u16);
        }
        let data = TabularDataset::from_codes(
            records,
            vec![0; n],
            vec!["f0".into(), "f1".into()],
            41,
        )
        .unwrap();
        let out = gmm_binary_labels(&data, 3).unwrap();
        let agree = agreement_up_to_swap(out.labels(), &truth);
        assert!(agree >= 0.9, "agreement {agree}");
    }

    #[test]
    fn deterministic_per_seed() {
        let data = crate::dataset::synthesize(200, 4, 0.5, 0.5, 4, 2).unwrap();
        let a = gmm_binary_labels(&data, 17).unwrap();
        let b = gmm_binary_labels(&data, 17).unwrap();
        assert_eq!(a, b);
    }
}
