//! Model-family contracts: gradient correctness against central finite
//! differences, training behavior, and the probability-vector interface.

use mia_lab::dataset::{synthesize, TabularDataset};
use mia_lab::models::{
    evaluate, evaluate_on, train, Family, LrSpec, MlpModel, MlpSpec, ModelSpec, RegForm, RegKind,
    RegularizerTerm,
};
use mia_lab::seed::rng_for;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

/// Random batch, labels and a zero-crossing-free parameter vector for one
/// gradient-check configuration.
fn random_config(seed: u64) -> (MlpModel, Array2<f64>, Vec<u8>) {
    let mut rng = rng_for(seed, &[0xFD]);
    let input = rng.gen_range(3..8usize);
    let hidden: Vec<usize> = match rng.gen_range(0..3u8) {
        0 => vec![],
        1 => vec![rng.gen_range(2..10usize)],
        _ => vec![rng.gen_range(2..10usize), rng.gen_range(2..10usize)],
    };
    let mut model = MlpModel::new_glorot(input, &hidden, seed);
    for t in model.theta_mut() {
        let mag = rng.gen_range(0.05..0.5);
        *t = if rng.gen_bool(0.5) { mag } else { -mag };
    }
    let n = rng.gen_range(2..7usize);
    let mut x = Array2::zeros((n, input));
    for v in x.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    (model, x, y)
}

fn check_gradient(reg: &RegularizerTerm, seed: u64) {
    let (mut model, x, y) = random_config(seed);
    let (_, grad) = model.loss_and_grad(x.view(), &y, reg).unwrap();
    let h = 1e-5;
    let p = model.theta().len();
    for j in 0..p {
        let orig = model.theta()[j];
        model.theta_mut()[j] = orig + h;
        let (up, _) = model.loss_and_grad(x.view(), &y, reg).unwrap();
        model.theta_mut()[j] = orig - h;
        let (down, _) = model.loss_and_grad(x.view(), &y, reg).unwrap();
        model.theta_mut()[j] = orig;
        let fd = (up - down) / (2.0 * h);
        let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-3);
        assert!(
            rel < 1e-4,
            "kind {:?} form {:?} coord {j}: analytic {} vs fd {} (rel {rel})",
            reg.kind,
            reg.form,
            grad[j],
            fd
        );
    }
}

#[test]
fn gradients_match_finite_differences_for_every_regularizer() {
    let regs = [
        RegularizerTerm::none(),
        RegularizerTerm::l1(0.013),
        RegularizerTerm::l2(0.02),
        RegularizerTerm::property(RegKind::GroupFair, 0.01, RegForm::AbsTimesExpR)
            .unwrap()
            .with_r(0.4),
        RegularizerTerm::property(RegKind::PredFair, 0.015, RegForm::SqTimesR)
            .unwrap()
            .with_r(0.7),
        RegularizerTerm::property(RegKind::IndivFair, 0.02, RegForm::AbsTimesExpR)
            .unwrap()
            .with_r(0.9),
        RegularizerTerm::property(RegKind::MutualInfo, 0.05, RegForm::SqTimesR)
            .unwrap()
            .with_r(0.2),
    ];
    for reg in &regs {
        for cfg in 0..20u64 {
            check_gradient(reg, 1000 + cfg);
        }
    }
}

#[test]
fn l2_adds_exactly_two_lambda_theta() {
    let (model, x, y) = random_config(7);
    let lambda = 0.05;
    let (_, g0) = model.loss_and_grad(x.view(), &y, &RegularizerTerm::none()).unwrap();
    let (_, g2) = model.loss_and_grad(x.view(), &y, &RegularizerTerm::l2(lambda)).unwrap();
    for (j, t) in model.theta().iter().enumerate() {
        assert!((g2[j] - g0[j] - 2.0 * lambda * t).abs() < 1e-12);
    }
}

#[test]
fn exp_r_at_zero_reduces_to_l1() {
    let (model, x, y) = random_config(9);
    let lambda = 0.03;
    let prop = RegularizerTerm::property(RegKind::GroupFair, lambda, RegForm::AbsTimesExpR)
        .unwrap()
        .with_r(0.0);
    let l1 = RegularizerTerm::l1(lambda);
    let (lp, gp) = model.loss_and_grad(x.view(), &y, &prop).unwrap();
    let (ll, gl) = model.loss_and_grad(x.view(), &y, &l1).unwrap();
    assert_eq!(lp, ll);
    assert_eq!(gp, gl);
}

#[test]
fn full_batch_loss_is_non_increasing() {
    let data = synthesize(300, 6, 0.5, 0.4, 4, 21).unwrap();
    for spec in [
        ModelSpec::Ann(MlpSpec { epochs: 40, ..Default::default() }),
        ModelSpec::Lr(LrSpec { learning_rate: 0.001, epochs: 40, ..Default::default() }),
    ] {
        let model = train(&spec, &data, 5).unwrap();
        let trace = &model.meta.loss_trace;
        assert_eq!(trace.len(), 40);
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "{:?}: loss rose {} -> {}",
                model.spec.family(),
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = synthesize(200, 5, 0.5, 0.5, 4, 3).unwrap();
    for family in Family::ALL {
        let spec = quick_spec(family);
        let a = train(&spec, &data, 42).unwrap();
        let b = train(&spec, &data, 42).unwrap();
        assert_eq!(a, b, "{} retrain differs", family.name());
        for i in 0..20 {
            assert_eq!(a.predict_proba(data.record(i)), b.predict_proba(data.record(i)));
        }
    }
}

#[test]
fn zero_weight_mlp_predicts_half_half() {
    let mut model = MlpModel::new_glorot(6, &[4], 1);
    for t in model.theta_mut() {
        *t = 0.0;
    }
    let x = Array2::zeros((1, 6));
    let p = model.forward_batch(x.view());
    assert_eq!(p[[0, 0]], 0.5);
    assert_eq!(p[[0, 1]], 0.5);
}

#[test]
fn lr_fits_a_separable_toy_exactly() {
    // Class 1 records live at high codes, class 0 at low codes.
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10u16 {
        records.extend([i % 2, 0]);
        labels.push(0);
        records.extend([2 + i % 2, 3]);
        labels.push(1);
    }
    let data = TabularDataset::from_codes(
        records,
        labels,
        vec!["a".into(), "b".into()],
        10,
    )
    .unwrap();
    let model = train(&ModelSpec::Lr(LrSpec::default()), &data, 1).unwrap();
    assert_eq!(evaluate(&model, &data), 1.0);
}

#[test]
fn exploding_learning_rate_errors_with_epoch() {
    let data = synthesize(100, 4, 0.5, 0.5, 4, 2).unwrap();
    let spec = ModelSpec::Ann(MlpSpec { learning_rate: 1e12, epochs: 30, ..Default::default() });
    let err = train(&spec, &data, 1);
    match err {
        Err(mia_lab::Error::NonFiniteLoss { .. }) => {}
        other => panic!("expected a non-finite loss error, got {other:?}"),
    }
}

#[test]
fn reference_network_learns_the_synthetic_benchmark() {
    // Reference hyperparameters with the minibatch knob engaged; full batch
    // at this learning-rate/epoch budget moves the weights too little.
    let data = synthesize(10_000, 16, 0.5, 0.5, 4, 5).unwrap();
    let train_idx: Vec<usize> = (0..7_500).collect();
    let test_idx: Vec<usize> = (7_500..10_000).collect();
    let spec = ModelSpec::Ann(MlpSpec { batch_size: Some(32), ..Default::default() });
    let model = train(&spec, &data.subset(&train_idx).unwrap(), 11).unwrap();
    let train_acc = evaluate_on(&model, &data, &train_idx);
    let test_acc = evaluate_on(&model, &data, &test_idx);
    assert!(test_acc > 0.65, "test accuracy {test_acc}");
    assert!(
        (train_acc - test_acc).abs() < 0.05,
        "overfit gap: train {train_acc}, test {test_acc}"
    );
}

fn quick_spec(family: Family) -> ModelSpec {
    match family {
        Family::Ann => ModelSpec::Ann(MlpSpec { epochs: 8, ..Default::default() }),
        Family::Lr => ModelSpec::Lr(LrSpec { epochs: 30, ..Default::default() }),
        Family::Svm => ModelSpec::Svm(mia_lab::models::SvmSpec {
            epochs: 30,
            num_random_features: 64,
            ..Default::default()
        }),
        Family::Rf => ModelSpec::Rf(mia_lab::models::RfSpec {
            n_estimators: 10,
            ..Default::default()
        }),
        Family::Knn => ModelSpec::default_for(Family::Knn),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Every family emits a nonnegative probability vector summing to 1,
    /// even for records with out-of-alphabet codes.
    #[test]
    fn probability_vector_contract(
        seed in 0u64..500,
        family_idx in 0usize..5,
        query_shift in 0u16..8,
    ) {
        let family = Family::ALL[family_idx];
        let data = synthesize(80, 4, 0.5, 0.5, 4, seed).unwrap();
        let model = train(&quick_spec(family), &data, seed ^ 0xABCD).unwrap();
        let mut record = data.record(0).to_vec();
        record[0] = record[0].saturating_add(query_shift);
        let p = model.predict_proba(&record);
        prop_assert!(p.probs[0] >= 0.0 && p.probs[1] >= 0.0);
        prop_assert!((p.probs[0] + p.probs[1] - 1.0).abs() < 1e-9);
        let expected = u8::from(p.probs[1] > p.probs[0]);
        prop_assert_eq!(p.argmax_label, expected);
    }
}
