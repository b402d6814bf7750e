//! Scratch harness for calibrating generator knobs and training presets.
//! Run with `cargo run --release --example calibrate -- <mode> [args]`.
//!
//! Sweep-shaped modes go through the real harness entry points so the
//! numbers they print are exactly what a config file would produce.

use std::time::Instant;

use mia_lab::attack::{attack_accuracy, build_attack_dataset, run_attack_pipeline, train_attack};
use mia_lab::dataset::{make_split, synthesize_with, SynthConfig};
use mia_lab::harness::{run_matrix, run_sweep, ExperimentConfig, ExperimentResult};
use mia_lab::metrics::spearman_r;
use mia_lab::models::{evaluate_on, train, Family, MlpSpec, ModelSpec};
use mia_lab::stats::mean;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "help".into());
    match mode.as_str() {
        "cb5" => balance_floor(),
        "cb10" => balance_disparity(),
        "dnull" => feature_count_null(),
        "shadow" => shadow_trend(),
        "ditrain" => deep_trainability(),
        "dimia" => deep_mia(),
        "families" => family_matrix(),
        "attackcal" => attack_calibration(),
        "debug" => debug_attack(),
        other => {
            eprintln!("unknown mode {other}");
            eprintln!("modes: cb5 cb10 dnull shadow ditrain dimia families attackcal debug");
        }
    }
}

fn arg(n: usize, default: f64) -> f64 {
    std::env::args().nth(n).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn sweep(toml: &str) -> ExperimentResult {
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let result = run_sweep(&cfg).unwrap();
    for s in &result.skipped {
        println!("skipped {}={}: {}", result.axis, s.value, s.reason);
    }
    for f in &result.failures {
        println!("FAILED {f:?}");
    }
    result
}

/// Per-value mean/min MIA plus the fairness column, preserving value order.
fn print_by_value(result: &ExperimentResult) {
    let mut order: Vec<String> = Vec::new();
    for row in &result.rows {
        let key = row.value.to_string();
        if !order.contains(&key) {
            order.push(key);
        }
    }
    for key in order {
        let rows: Vec<_> =
            result.rows.iter().filter(|r| r.value.to_string() == key).collect();
        let mias: Vec<f64> = rows.iter().map(|r| r.mia_acc).collect();
        let dgs: Vec<f64> = rows.iter().map(|r| r.delta_g).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.train_acc - r.test_acc).collect();
        let min = mias.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "  {key}: mia mean={:.4} min={min:.4} delta_g={:.4} gap={:.4}  {mias:.4?}",
            mean(&mias),
            mean(&dgs),
            mean(&gaps)
        );
    }
}

fn pooled_spearman(result: &ExperimentResult) {
    let dg: Vec<f64> = result.rows.iter().map(|r| r.delta_g).collect();
    let mia: Vec<f64> = result.rows.iter().map(|r| r.mia_acc).collect();
    match spearman_r(&dg, &mia) {
        Ok(rho) => println!("pooled spearman(delta_g, mia) = {rho:.4} over {} rows", dg.len()),
        Err(e) => println!("pooled spearman failed: {e}"),
    }
}

/// Member-rebalanced class-balance sweep: training pools drawn at the swept
/// balance, non-members at the source mix. The class prior alone should put
/// MIA near 0.75 - b/2 even for a target that leaks nothing.
fn balance_floor() {
    let result = sweep(
        r#"
        [split]
        target_size = 2000
        shadow_size = 4000

        [sweep]
        axis = "class_balance"
        values = [0.1, 0.2, 0.3, 0.4, 0.5]
        repetitions = 3
        seed = 71
        rebalance = "members"
        "#,
    );
    println!("member-rebalanced, weak ann target (floor should be 0.75 - b/2):");
    print_by_value(&result);
}

/// Whole-pool class-balance sweep over a skewed generator with a KNN target:
/// both the fitted group disparity and the leak should rise with balance.
fn balance_disparity() {
    let t = arg(2, 10_000.0) as usize;
    let s = arg(3, 10_000.0) as usize;
    let result = sweep(&format!(
        r#"
        [data.synthetic]
        modal_skew = 0.25

        [split]
        target_size = {t}
        shadow_size = {s}

        [models.target]
        family = "knn"

        [sweep]
        axis = "class_balance"
        values = [0.1, 0.3, 0.5]
        repetitions = 3
        seed = 72
        "#
    ));
    println!("whole-pool, skew 0.25, knn target {t}/{s}:");
    print_by_value(&result);
    pooled_spearman(&result);
}

/// Feature-count sweep with the weak default MLP: expect a flat ~0.5 line.
fn feature_count_null() {
    let result = sweep(
        r#"
        [sweep]
        axis = "num_features"
        values = [4, 8, 12, 16]
        repetitions = 3
        seed = 73
        "#,
    );
    println!("feature-count axis, weak ann target:");
    print_by_value(&result);
    let d: Vec<f64> = result.rows.iter().map(|r| r.value.as_f64().unwrap()).collect();
    let mia: Vec<f64> = result.rows.iter().map(|r| r.mia_acc).collect();
    println!("pooled spearman(d, mia) = {:?}", spearman_r(&d, &mia));
}

/// Shadow-size sweep with the KNN target, the headline increasing trend.
fn shadow_trend() {
    let result = sweep(
        r#"
        [models.target]
        family = "knn"

        [sweep]
        axis = "shadow_size"
        values = [1000, 2000, 5000, 10000, 20000]
        repetitions = 3
        seed = 74
        "#,
    );
    println!("shadow-size axis, knn target:");
    print_by_value(&result);
}

/// Can a 5x1000 sigmoid net learn at all, per init scale and learning rate?
/// Small train set keeps each fit to seconds; accuracy, not leak, is the
/// question here.
fn deep_trainability() {
    let cfg = SynthConfig { num_records: 4_000, seed: 31, ..SynthConfig::default() };
    let data = synthesize_with(&cfg).unwrap();
    let train_idx: Vec<usize> = (0..1_000).collect();
    let test_idx: Vec<usize> = (1_000..4_000).collect();
    let sub = data.subset(&train_idx).unwrap();
    for scale in [1.0, 2.0, 3.0, 4.0, 6.0] {
        for lr in [0.01, 0.03, 0.1] {
            let spec = ModelSpec::Ann(MlpSpec {
                hidden_layers: vec![1000; 5],
                learning_rate: lr,
                epochs: 15,
                batch_size: Some(32),
                init_scale: scale,
                ..MlpSpec::default()
            });
            let t0 = Instant::now();
            let model = train(&spec, &sub, 11).unwrap();
            println!(
                "scale={scale} lr={lr}: train={:.4} test={:.4}  ({:.0?})",
                evaluate_on(&model, &data, &train_idx),
                evaluate_on(&model, &data, &test_idx),
                t0.elapsed()
            );
        }
    }
}

/// Full 5x1000 MIA probe at matched target/shadow pools; compares against
/// the weak 1x50 default on the same splits.
/// Args: scale lr epochs [seeds].
fn deep_mia() {
    let scale = arg(2, 4.0);
    let lr = arg(3, 0.03);
    let epochs = arg(4, 20.0) as usize;
    let seeds = arg(5, 2.0) as u64;
    let deep = ModelSpec::Ann(MlpSpec {
        hidden_layers: vec![1000; 5],
        learning_rate: lr,
        epochs,
        batch_size: Some(32),
        init_scale: scale,
        ..MlpSpec::default()
    });
    let shallow = ModelSpec::default_for(Family::Ann);
    let cfg = SynthConfig { num_records: 21_000, seed: 31, ..SynthConfig::default() };
    let data = synthesize_with(&cfg).unwrap();
    for seed in 0..seeds {
        let split = make_split(&data, 10_000, 10_000, 100 + seed).unwrap();
        let target_data = data.subset(&split.target_train).unwrap();
        for (tag, spec) in [("deep", &deep), ("shallow", &shallow)] {
            let t0 = Instant::now();
            let target = train(spec, &target_data, seed ^ 0x51).unwrap();
            let tr = evaluate_on(&target, &data, &split.target_train);
            let te = evaluate_on(&target, &data, &split.target_holdout);
            let mia = run_attack_pipeline(&target, spec, &split, &data, seed ^ 0x52).unwrap();
            println!(
                "[seed {seed} {tag} scale={scale} lr={lr} e={epochs}] mia={mia:.4} \
                 train={tr:.4} test={te:.4} gap={:.4}  ({:.0?})",
                tr - te,
                t0.elapsed()
            );
        }
    }
}

/// Five-family target x shadow matrix with the union column, through the
/// real matrix runner. Args: target_pool shadow_pool [reps].
fn family_matrix() {
    let t = arg(2, 10_000.0) as usize;
    let s = arg(3, 10_000.0) as usize;
    let reps = arg(4, 1.0) as usize;
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
        [split]
        target_size = {t}
        shadow_size = {s}

        [models.ann]
        learning_rate = 0.01
        epochs = 300
        batch_size = 32

        [sweep]
        axis = "family_matrix"
        repetitions = {reps}
        seed = 75
        "#
    ))
    .unwrap();
    let t0 = Instant::now();
    let result = run_matrix(&cfg).unwrap();
    for f in &result.failures {
        println!("FAILED {f}");
    }
    println!("target x shadow matrix at {t}/{s}, {reps} rep(s)  ({:.0?}):", t0.elapsed());
    println!("  target    {}", result.shadows.join("    "));
    for (ti, row) in result.grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map_or("  fail".into(), |v| format!("{v:.4}")))
            .collect();
        let singles: Vec<f64> = row[..row.len() - 1].iter().flatten().cloned().collect();
        let best = singles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let all = row.last().cloned().flatten().unwrap_or(f64::NAN);
        println!(
            "  {:8} {}  best_single={best:.4} all-best={:+.4}",
            Family::ALL[ti].name(),
            cells.join("  "),
            all - best
        );
    }
}

/// Grid over attack-MLP training knobs on one real KNN-shadow dataset.
fn attack_calibration() {
    use mia_lab::models::train_on_matrix;
    use ndarray::Array2;

    let cfg = SynthConfig { num_records: 21_000, seed: 5, ..SynthConfig::default() };
    let data = synthesize_with(&cfg).unwrap();
    let split = make_split(&data, 10_000, 10_000, 7).unwrap();
    let spec = ModelSpec::default_for(Family::Knn);
    let shadow_data = data.subset(&split.shadow_in).unwrap();
    let shadow = train(&spec, &shadow_data, 5).unwrap();
    let examples =
        build_attack_dataset(&shadow, &data, &split.shadow_in, &split.shadow_out, 7).unwrap();
    let flat: Vec<f64> = examples.iter().flat_map(|e| e.features()).collect();
    let x = Array2::from_shape_vec((examples.len(), 4), flat).unwrap();
    let y: Vec<u8> = examples.iter().map(|e| e.membership).collect();

    for (lr, epochs, batch) in [
        (0.01, 100usize, Some(32)),
        (0.03, 100, Some(32)),
        (0.1, 100, Some(32)),
        (0.3, 100, Some(32)),
        (0.1, 300, Some(32)),
        (0.3, 300, Some(32)),
        (0.1, 100, Some(128)),
        (0.5, 300, Some(128)),
    ] {
        let t0 = Instant::now();
        let cfg = mia_lab::models::MlpTrainConfig {
            learning_rate: lr,
            epochs,
            l2_lambda: 1e-7,
            hidden_layers: vec![50],
            batch_size: batch,
            init_scale: 1.0,
        };
        let (core, trace) = train_on_matrix(&cfg, x.view(), &y, 3).unwrap();
        let p = core.forward_batch(x.view());
        let hits = (0..examples.len())
            .filter(|&i| u8::from(p[[i, 1]] > p[[i, 0]]) == y[i])
            .count();
        println!(
            "lr={lr} epochs={epochs} batch={batch:?}: train_acc={:.4} final_loss={:.4} ({:.1?})",
            hits as f64 / examples.len() as f64,
            trace.last().unwrap(),
            t0.elapsed()
        );
    }
}

/// Stage-by-stage signal inspection for one KNN x KNN cell.
fn debug_attack() {
    use mia_lab::attack::evaluate_mia;

    let cfg = SynthConfig { num_records: 21_000, seed: 5, ..SynthConfig::default() };
    let data = synthesize_with(&cfg).unwrap();
    let split = make_split(&data, 10_000, 10_000, 7).unwrap();
    let spec = ModelSpec::default_for(Family::Knn);

    let shadow_data = data.subset(&split.shadow_in).unwrap();
    let shadow = train(&spec, &shadow_data, 5).unwrap();
    let examples =
        build_attack_dataset(&shadow, &data, &split.shadow_in, &split.shadow_out, 7).unwrap();
    let stats = |m: u8| {
        let rows: Vec<_> = examples.iter().filter(|e| e.membership == m).collect();
        let mean_ptrue = rows
            .iter()
            .map(|e| e.prediction[usize::from(e.class_onehot[1] == 1.0)])
            .sum::<f64>()
            / rows.len() as f64;
        (rows.len(), mean_ptrue)
    };
    println!("shadow IN  (n, mean p_trueclass) = {:?}", stats(1));
    println!("shadow OUT (n, mean p_trueclass) = {:?}", stats(0));

    let attack = train_attack(&examples, 7).unwrap();
    println!("attack accuracy on own training data = {:.4}", attack_accuracy(&attack, &examples));
    let member_share = examples
        .iter()
        .filter(|e| attack.predict(e.features()).argmax_label == 1)
        .count() as f64
        / examples.len() as f64;
    println!("share of attack-train rows answered member = {member_share:.4}");

    let target_data = data.subset(&split.target_train).unwrap();
    let target = train(&spec, &target_data, 11).unwrap();
    println!("mia = {:.4}", evaluate_mia(&attack, &target, &split, &data).unwrap());
}
