//! Sweep and matrix execution.
//!
//! Cells run sequentially (each cell is internally single-threaded) and
//! rows are appended in (axis value, repetition) order, so result files are
//! deterministic regardless of timing. Per-cell seeds come from
//! `derive_seed(base, [CELL_TAG, axis_index, repetition])` and are checked
//! pairwise distinct before anything runs.

use std::time::Instant;

use crate::attack::{
    build_attack_dataset, one_vs_all_attack, run_attack_pipeline, train_attack, train_union_attack,
    AttackModel,
};
use crate::dataset::{
    load_csv, make_biased_split, make_split_with_eval_cap, measure_properties, resample_to,
    ExperimentSplit, PropertyReport, SynthConfig, TabularDataset,
};
use crate::defense::{train_defended, DefenseParams};
use crate::error::{Error, Result};
use crate::harness::config::{Axis, AxisValue, ExperimentConfig, SweepConfig};
use crate::metrics::{default_group_feature, measure_fairness};
use crate::models::{
    evaluate_on, train, Family, MlpSpec, ModelSpec, RegKind, RegularizerTerm, TrainedModel,
};
use crate::seed::derive_seed;

/// Sampled-pair budget for the per-row individual-fairness delta.
pub const FAIRNESS_PAIR_BUDGET: usize = 500;

const CELL_TAG: u64 = 0x53_5745_4550;
const MATRIX_TAG: u64 = 0x4d41_5452;

/// One completed sweep cell, flattened for CSV rows. The fairness group
/// partition itself is omitted; `group_feature` pins it down given the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis: Axis,
    pub value: AxisValue,
    pub repetition: usize,
    pub seed: u64,
    pub mia_acc: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub properties: PropertyReport,
    pub delta_g: f64,
    pub delta_p: Option<f64>,
    pub delta_i: f64,
    pub delta_mi: f64,
    pub group_feature: usize,
    pub wall_ms: u128,
}

/// A cell whose configuration cannot be realized (for example a shadow pool
/// larger than the data); logged and left out of the results.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub value: AxisValue,
    pub repetition: usize,
    pub reason: String,
}

/// A cell that errored while running.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub value: AxisValue,
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub axis: Axis,
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<SkippedCell>,
    pub failures: Vec<FailedCell>,
    /// Fully resolved config, embedded for provenance.
    pub config_json: String,
}

/// Per-cell seed; distinct per (axis value, repetition) by construction.
pub fn cell_seed(base: u64, axis_index: usize, repetition: usize) -> u64 {
    derive_seed(base, &[CELL_TAG, axis_index as u64, repetition as u64])
}

enum CellOutcome {
    Row(Box<ResultRow>),
    Skip(String),
}

/// Runs every (axis value, repetition) cell of the configured sweep.
///
/// Infeasible cells are skipped with a reason; cells that error while
/// training are recorded as failures. Neither aborts the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let sweep = cfg.sweep()?;
    let csv_data = load_csv_source(cfg)?;
    ensure_distinct_seeds(sweep)?;

    let mut result = ExperimentResult {
        axis: sweep.axis,
        rows: Vec::new(),
        skipped: Vec::new(),
        failures: Vec::new(),
        config_json: cfg.resolved_json(),
    };
    for (vi, value) in sweep.values.iter().enumerate() {
        for rep in 0..sweep.repetitions {
            let seed = cell_seed(sweep.seed, vi, rep);
            let started = Instant::now();
            match run_cell(cfg, sweep, value, csv_data.as_ref(), seed) {
                Ok(CellOutcome::Row(mut row)) => {
                    row.repetition = rep;
                    row.wall_ms = started.elapsed().as_millis();
                    eprintln!(
                        "[{}={} rep {rep}] mia={:.4} ({} ms)",
                        sweep.axis, value, row.mia_acc, row.wall_ms
                    );
                    result.rows.push(*row);
                }
                Ok(CellOutcome::Skip(reason)) => {
                    eprintln!("[{}={} rep {rep}] skipped: {reason}", sweep.axis, value);
                    result.skipped.push(SkippedCell {
                        value: value.clone(),
                        repetition: rep,
                        reason,
                    });
                }
                Err(e) => {
                    eprintln!("[{}={} rep {rep}] failed: {e}", sweep.axis, value);
                    result.failures.push(FailedCell {
                        value: value.clone(),
                        repetition: rep,
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(result)
}

fn ensure_distinct_seeds(sweep: &SweepConfig) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for vi in 0..sweep.values.len().max(1) {
        for rep in 0..sweep.repetitions {
            if !seen.insert(cell_seed(sweep.seed, vi, rep)) {
                return Err(Error::Config(format!(
                    "cell seed collision at value {vi}, repetition {rep}"
                )));
            }
        }
    }
    Ok(())
}

fn load_csv_source(cfg: &ExperimentConfig) -> Result<Option<TabularDataset>> {
    let Some(src) = &cfg.data.csv else { return Ok(None) };
    let (data, report) =
        load_csv(&src.path, &src.label_column, src.bins, src.label_threshold)?;
    if report.dropped_missing > 0 {
        eprintln!(
            "loaded {}: kept {} rows, dropped {} with missing values",
            src.path.display(),
            report.rows_kept,
            report.dropped_missing
        );
    }
    Ok(Some(data))
}

/// Split sizes with the axis override applied.
/// Builds the configured dataset and one split, outside any sweep.
/// Single-run entry points (attack, defend) share this with the sweep path
/// so their data matches a sweep cell at the same seed.
pub fn materialize(cfg: &ExperimentConfig, seed: u64) -> Result<(TabularDataset, ExperimentSplit)> {
    let csv_data = load_csv_source(cfg)?;
    let sizes = (cfg.split.target_size, cfg.split.shadow_size);
    let data = cell_data(
        cfg,
        Axis::ShadowSize,
        &AxisValue::Int(0),
        csv_data.as_ref(),
        sizes,
        false,
        seed,
    )?;
    let split = make_split_with_eval_cap(
        &data,
        sizes.0,
        sizes.1,
        cfg.split.eval_cap,
        derive_seed(seed, &[0x53]),
    )?;
    Ok((data, split))
}

fn cell_sizes(cfg: &ExperimentConfig, axis: Axis, value: &AxisValue) -> Result<(usize, usize)> {
    let mut target = cfg.split.target_size;
    let mut shadow = cfg.split.shadow_size;
    match axis {
        Axis::TargetSize => target = value.as_size()?,
        Axis::ShadowSize => shadow = value.as_size()?,
        _ => {}
    }
    Ok((target, shadow))
}

/// Materializes the cell's dataset: a fresh synthetic draw per cell, or the
/// shared CSV data (resampled per cell only when the axis demands it).
///
/// In member-biased mode the balance is applied later by the split, so the
/// pool keeps its source mix here and only needs to be big enough for the
/// skewed member draw.
fn cell_data(
    cfg: &ExperimentConfig,
    axis: Axis,
    value: &AxisValue,
    csv_data: Option<&TabularDataset>,
    sizes: (usize, usize),
    member_biased: bool,
    seed: u64,
) -> Result<TabularDataset> {
    let data_seed = derive_seed(seed, &[0x44]);
    match csv_data {
        None => {
            let mut sc = cfg.data.synth();
            sc.seed = data_seed;
            match axis {
                Axis::ClassBalance if !member_biased => sc.class_balance = value.as_f64()?,
                Axis::FeatureBalance => sc.feature_balance = value.as_f64()?,
                Axis::NumFeatures => sc.num_features = value.as_size()?,
                Axis::EntropyBucket => sc.alphabet_size = value.as_size()?,
                _ => {}
            }
            // A pool left at the generator default is treated as auto-sized
            // and grows to cover the split. An explicit size is honored, so
            // cells it cannot host are skipped rather than silently enlarged.
            if sc.num_records == SynthConfig::default().num_records {
                let mut needed = sizes.0 + sizes.1;
                if member_biased && axis == Axis::ClassBalance {
                    needed = needed.max(biased_pool_requirement(
                        sizes,
                        value.as_f64()?,
                        sc.class_balance,
                    ));
                }
                sc.num_records = sc.num_records.max(needed);
            }
            synthesize_checked(&sc)
        }
        Some(data) => {
            if axis.is_data_axis() && axis != Axis::ClassBalance {
                return Err(Error::Insufficient(format!(
                    "the {axis} axis needs the synthesizer, not a csv source"
                )));
            }
            let size = cfg
                .data
                .csv
                .as_ref()
                .and_then(|c| c.resample)
                .unwrap_or(sizes.0 + sizes.1)
                .min(data.num_records());
            if axis == Axis::ClassBalance && !member_biased {
                resample_to(data, Some(value.as_f64()?), size, data_seed)
            } else if size < data.num_records() {
                resample_to(data, None, size, data_seed)
            } else {
                Ok(data.clone())
            }
        }
    }
}

/// Smallest source pool that can cover member pools rebalanced to `b` plus
/// the natural non-member pools, given a source balance of `source`.
fn biased_pool_requirement(sizes: (usize, usize), b: f64, source: f64) -> usize {
    let train = (0.75 * sizes.0 as f64).round();
    let members = train + (sizes.1 / 2) as f64;
    let nonmembers = (sizes.0 as f64 - train) + (sizes.1 / 2) as f64;
    let minority_need = (b * members) / source.max(1e-9);
    let majority_need = ((1.0 - b) * members) / (1.0 - source).max(1e-9);
    let class_bound = minority_need.max(majority_need) + nonmembers;
    // 2% slack absorbs rounding and the shuffle's class interleaving.
    (class_bound * 1.02).ceil() as usize + 10
}

fn synthesize_checked(sc: &SynthConfig) -> Result<TabularDataset> {
    crate::dataset::synthesize_with(sc)
}

/// Target spec with the axis override applied; `None` shadow means
/// one-vs-all.
fn cell_specs(
    cfg: &ExperimentConfig,
    axis: Axis,
    value: &AxisValue,
) -> Result<(ModelSpec, Option<ModelSpec>)> {
    let mut target = cfg.models.target.clone();
    match axis {
        Axis::Depth | Axis::Width | Axis::LearningRate | Axis::L2Lambda => {
            let ModelSpec::Ann(ref mut mlp) = target else {
                return Err(Error::Config(format!("the {axis} axis needs an ann target")));
            };
            apply_mlp_axis(mlp, axis, value)?;
        }
        Axis::FamilyMatrix => {
            let (t, s) = value.as_family_pair()?;
            let target = cfg.models.family_spec(t);
            let shadow = s.map(|s| cfg.models.family_spec(s));
            return Ok((target, shadow));
        }
        _ => {}
    }
    // The attacker mimics the target unless a shadow spec is pinned.
    let shadow = Some(cfg.models.shadow.clone().unwrap_or_else(|| target.clone()));
    Ok((target, shadow))
}

fn apply_mlp_axis(mlp: &mut MlpSpec, axis: Axis, value: &AxisValue) -> Result<()> {
    match axis {
        Axis::Depth => {
            let width = mlp.hidden_layers.first().copied().unwrap_or(50);
            mlp.hidden_layers = vec![width; value.as_size()?];
        }
        Axis::Width => {
            let depth = mlp.hidden_layers.len().max(1);
            mlp.hidden_layers = vec![value.as_size()?; depth];
        }
        Axis::LearningRate => mlp.learning_rate = value.as_f64()?,
        Axis::L2Lambda => mlp.l2_lambda = value.as_f64()?,
        _ => unreachable!("not an mlp axis"),
    }
    Ok(())
}

fn run_cell(
    cfg: &ExperimentConfig,
    sweep: &SweepConfig,
    value: &AxisValue,
    csv_data: Option<&TabularDataset>,
    seed: u64,
) -> Result<CellOutcome> {
    let axis = sweep.axis;
    let biased = sweep.member_biased() && axis == Axis::ClassBalance;
    let sizes = cell_sizes(cfg, axis, value)?;
    let data = match cell_data(cfg, axis, value, csv_data, sizes, biased, seed) {
        Ok(d) => d,
        Err(e @ (Error::Insufficient(_) | Error::InvalidArgument(_))) => {
            return Ok(CellOutcome::Skip(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let split_seed = derive_seed(seed, &[0x53]);
    let split = if biased {
        make_biased_split(&data, sizes.0, sizes.1, value.as_f64()?, cfg.split.eval_cap, split_seed)
    } else {
        make_split_with_eval_cap(&data, sizes.0, sizes.1, cfg.split.eval_cap, split_seed)
    };
    let split = match split {
        Ok(s) => s,
        Err(e @ (Error::Insufficient(_) | Error::InvalidArgument(_))) => {
            return Ok(CellOutcome::Skip(e.to_string()))
        }
        Err(e) => return Err(e),
    };

    let (target_spec, shadow_spec) = cell_specs(cfg, axis, value)?;
    let (target, mia_acc, train_acc, test_acc) = if axis == Axis::RegularizerKind {
        defended_cell(cfg, &target_spec, &data, &split, value, seed)?
    } else {
        let target_data = data.subset(&split.target_train)?;
        let target = train(&target_spec, &target_data, derive_seed(seed, &[0x54]))?;
        let mia = match &shadow_spec {
            Some(spec) => run_attack_pipeline(&target, spec, &split, &data, derive_seed(seed, &[0x41]))?,
            None => one_vs_all_attack(
                &target,
                &cfg.models.all_family_specs(),
                &split,
                &data,
                derive_seed(seed, &[0x41]),
            )?,
        };
        let train_acc = evaluate_on(&target, &data, &split.target_train);
        let test_acc = evaluate_on(&target, &data, &split.target_holdout);
        (target, mia, train_acc, test_acc)
    };

    // Properties describe the target's training set, not the whole pool:
    // under a biased split they differ, and the row should report what the
    // target actually saw.
    let properties = measure_properties(&data.subset(&split.target_train)?)?;
    let group_feature = default_group_feature(&data);
    let fairness = measure_fairness(
        &target,
        &data,
        &split.target_train,
        &split.target_holdout,
        group_feature,
        FAIRNESS_PAIR_BUDGET,
        derive_seed(seed, &[0x46]),
    )?;

    Ok(CellOutcome::Row(Box::new(ResultRow {
        axis,
        value: value.clone(),
        repetition: 0,
        seed,
        mia_acc,
        train_acc,
        test_acc,
        properties,
        delta_g: fairness.delta_g,
        delta_p: fairness.delta_p,
        delta_i: fairness.delta_i,
        delta_mi: fairness.delta_mi,
        group_feature,
        wall_ms: 0,
    })))
}

/// RegularizerKind cells train through the defended loop; the defense
/// settings (lambda, form, probe counts) come from `[defense]`.
fn defended_cell(
    cfg: &ExperimentConfig,
    target_spec: &ModelSpec,
    data: &TabularDataset,
    split: &ExperimentSplit,
    value: &AxisValue,
    seed: u64,
) -> Result<(TrainedModel, f64, f64, f64)> {
    let defense = cfg.defense();
    let kind = value.as_reg_kind()?;
    let reg = regularizer_for(kind, defense.lambda, defense.reg_form()?)?;
    let params: DefenseParams = defense.params();
    let res = train_defended(target_spec, data, split, &reg, &params, derive_seed(seed, &[0x52]))?;
    Ok((res.trained, res.mia_acc, res.train_acc, res.test_acc))
}

pub fn regularizer_for(
    kind: RegKind,
    lambda: f64,
    form: crate::models::RegForm,
) -> Result<RegularizerTerm> {
    Ok(match kind {
        RegKind::None => RegularizerTerm::none(),
        RegKind::L1 => RegularizerTerm::l1(lambda),
        RegKind::L2 => RegularizerTerm::l2(lambda),
        property => RegularizerTerm::property(property, lambda, form)?,
    })
}

/// Column order of the matrix: the five families then the union attack.
pub fn shadow_columns() -> Vec<String> {
    Family::ALL.iter().map(|f| f.name().to_string()).chain(["all".to_string()]).collect()
}

/// One evaluated matrix cell sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub target: Family,
    /// A family name or `"all"`.
    pub shadow: String,
    pub repetition: usize,
    pub seed: u64,
    pub mia_acc: f64,
    pub wall_ms: u128,
}

/// Mean MIA accuracy per target x shadow cell; `None` marks a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixResult {
    pub shadows: Vec<String>,
    /// `grid[t][s]` in `Family::ALL` x `shadows` order.
    pub grid: Vec<Vec<Option<f64>>>,
    pub rows: Vec<MatrixRow>,
    pub failures: Vec<String>,
    pub config_json: String,
}

/// Runs the full five-family target x (five shadows + union) grid.
///
/// Within a repetition every target shares one dataset and split, and each
/// shadow family is trained once and scored against all five targets; the
/// union attack is seed-identical to [`one_vs_all_attack`] on the same
/// repetition seed.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<MatrixResult> {
    let sweep = cfg.sweep()?;
    if sweep.axis != Axis::FamilyMatrix {
        return Err(Error::Config("matrix runs need sweep.axis = \"family_matrix\"".into()));
    }
    let csv_data = load_csv_source(cfg)?;
    let specs = cfg.models.all_family_specs();
    let shadows = shadow_columns();
    let mut samples: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); shadows.len()]; specs.len()];
    let mut result = MatrixResult {
        shadows: shadows.clone(),
        grid: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
        config_json: cfg.resolved_json(),
    };

    for rep in 0..sweep.repetitions {
        let rep_seed = derive_seed(sweep.seed, &[MATRIX_TAG, rep as u64]);
        let sizes = (cfg.split.target_size, cfg.split.shadow_size);
        let data = match cell_data(
            cfg,
            Axis::FamilyMatrix,
            &AxisValue::Int(0),
            csv_data.as_ref(),
            sizes,
            false,
            rep_seed,
        ) {
            Ok(d) => d,
            Err(e) => {
                result.failures.push(format!("rep {rep}: data: {e}"));
                continue;
            }
        };
        let split = match make_split_with_eval_cap(
            &data,
            sizes.0,
            sizes.1,
            cfg.split.eval_cap,
            derive_seed(rep_seed, &[0x53]),
        ) {
            Ok(s) => s,
            Err(e) => {
                result.failures.push(format!("rep {rep}: split: {e}"));
                continue;
            }
        };

        let target_data = data.subset(&split.target_train)?;
        let targets: Vec<Result<TrainedModel>> = specs
            .iter()
            .enumerate()
            .map(|(t, spec)| train(spec, &target_data, derive_seed(rep_seed, &[0x54, t as u64])))
            .collect();
        for (t, outcome) in targets.iter().enumerate() {
            if let Err(e) = outcome {
                result.failures.push(format!("rep {rep}: target {}: {e}", Family::ALL[t].name()));
            }
        }

        // Mirrors per_family_attack_datasets piecewise so one failed family
        // only poisons its own column (and the union).
        let shadow_data = data.subset(&split.shadow_in)?;
        let mut sets = Vec::with_capacity(specs.len());
        for (s, spec) in specs.iter().enumerate() {
            let set = train(spec, &shadow_data, derive_seed(rep_seed, &[0x5348, s as u64]))
                .and_then(|shadow| {
                    build_attack_dataset(
                        &shadow,
                        &data,
                        &split.shadow_in,
                        &split.shadow_out,
                        derive_seed(rep_seed, &[0x4144, s as u64]),
                    )
                });
            if let Err(e) = &set {
                result.failures.push(format!("rep {rep}: shadow {}: {e}", Family::ALL[s].name()));
            }
            sets.push(set);
        }

        let mut attacks: Vec<Result<AttackModel>> = sets
            .iter()
            .enumerate()
            .map(|(s, set)| match set {
                Ok(examples) => train_attack(examples, derive_seed(rep_seed, &[0x41, s as u64])),
                Err(e) => Err(Error::InvalidArgument(format!("shadow failed: {e}"))),
            })
            .collect();
        let union: Result<AttackModel> = if sets.iter().all(|s| s.is_ok()) {
            let ok: Vec<Vec<crate::attack::AttackExample>> =
                sets.iter().map(|s| s.as_ref().unwrap().clone()).collect();
            train_union_attack(&ok, rep_seed)
        } else {
            Err(Error::InvalidArgument("union needs every shadow family".into()))
        };
        attacks.push(union);

        for (t, target) in targets.iter().enumerate() {
            let Ok(target) = target else { continue };
            for (s, attack) in attacks.iter().enumerate() {
                let Ok(attack) = attack else {
                    result.failures.push(format!(
                        "rep {rep}: cell {}x{}: attack unavailable",
                        Family::ALL[t].name(),
                        result.shadows[s]
                    ));
                    continue;
                };
                let started = Instant::now();
                match crate::attack::evaluate_mia(attack, target, &split, &data) {
                    Ok(mia) => {
                        samples[t][s].push(mia);
                        result.rows.push(MatrixRow {
                            target: Family::ALL[t],
                            shadow: result.shadows[s].clone(),
                            repetition: rep,
                            seed: rep_seed,
                            mia_acc: mia,
                            wall_ms: started.elapsed().as_millis(),
                        });
                    }
                    Err(e) => result.failures.push(format!(
                        "rep {rep}: cell {}x{}: {e}",
                        Family::ALL[t].name(),
                        result.shadows[s]
                    )),
                }
            }
        }
        eprintln!("[matrix rep {rep}] done");
    }

    result.grid = samples
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| {
                    (cell.len() == sweep.repetitions)
                        .then(|| cell.iter().sum::<f64>() / cell.len() as f64)
                })
                .collect()
        })
        .collect();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn tiny_sweep_config(axis: &str, values: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
            [data.synthetic]
            num_records = 1400
            num_features = 6

            [split]
            target_size = 400
            shadow_size = 600

            [models.target]
            family = "knn"

            [sweep]
            axis = "{axis}"
            values = {values}
            repetitions = 2
            seed = 9
            "#
        ))
        .unwrap()
    }

    #[test]
    fn sweep_produces_one_row_per_cell() {
        let cfg = tiny_sweep_config("shadow_size", "[200, 400]");
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result.skipped.is_empty(), "{:?}", result.skipped);
        assert!(result.failures.is_empty(), "{:?}", result.failures);
        let seeds: std::collections::HashSet<u64> =
            result.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 4, "cell seeds must be pairwise distinct");
        for row in &result.rows {
            assert!((0.0..=1.0).contains(&row.mia_acc));
            assert!((0.0..=1.0).contains(&row.train_acc));
            assert!((0.0..=1.0).contains(&row.delta_g));
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = tiny_sweep_config("class_balance", "[0.3, 0.5]");
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let strip = |r: &ResultRow| {
            let mut r = r.clone();
            r.wall_ms = 0;
            r
        };
        assert_eq!(
            a.rows.iter().map(strip).collect::<Vec<_>>(),
            b.rows.iter().map(strip).collect::<Vec<_>>()
        );
    }

    #[test]
    fn infeasible_cells_are_skipped_not_fatal() {
        // 2600 shadow + 400 target exceeds the fixed 1400-record pool only
        // for the second value.
        let cfg = tiny_sweep_config("shadow_size", "[400, 2600]");
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.skipped.len(), 2);
        assert!(result.skipped[0].reason.contains("cannot host"), "{}", result.skipped[0].reason);
    }

    #[test]
    fn class_balance_axis_moves_measured_balance() {
        let cfg = tiny_sweep_config("class_balance", "[0.2, 0.5]");
        let result = run_sweep(&cfg).unwrap();
        let mean_cb = |v: f64| {
            let rows: Vec<&ResultRow> = result
                .rows
                .iter()
                .filter(|r| r.value == AxisValue::Float(v))
                .collect();
            rows.iter().map(|r| r.properties.class_balance).sum::<f64>() / rows.len() as f64
        };
        assert!((mean_cb(0.2) - 0.2).abs() < 0.03);
        assert!((mean_cb(0.5) - 0.5).abs() < 0.03);
    }

    #[test]
    fn depth_axis_reshapes_target() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [data.synthetic]
            num_records = 1000
            num_features = 4

            [split]
            target_size = 200
            shadow_size = 200

            [models.target]
            family = "ann"
            epochs = 2
            hidden_layers = [8]

            [sweep]
            axis = "depth"
            values = [0, 2]
            repetitions = 1
            seed = 4
            "#,
        )
        .unwrap();
        let (spec, _) = cell_specs(&cfg, Axis::Depth, &AxisValue::Int(2)).unwrap();
        let ModelSpec::Ann(mlp) = spec else { panic!() };
        assert_eq!(mlp.hidden_layers, vec![8, 8]);
        let (spec, _) = cell_specs(&cfg, Axis::Depth, &AxisValue::Int(0)).unwrap();
        let ModelSpec::Ann(mlp) = spec else { panic!() };
        assert!(mlp.hidden_layers.is_empty());
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 2, "{:?}", result.failures);
    }

    #[test]
    fn matrix_all_column_matches_one_vs_all() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [data.synthetic]
            num_records = 900
            num_features = 4

            [split]
            target_size = 200
            shadow_size = 400

            [models.ann]
            epochs = 3
            [models.lr]
            epochs = 10
            [models.svm]
            epochs = 10
            num_random_features = 32
            [models.rf]
            n_estimators = 10

            [sweep]
            axis = "family_matrix"
            repetitions = 1
            seed = 33
            "#,
        )
        .unwrap();
        let result = run_matrix(&cfg).unwrap();
        assert!(result.failures.is_empty(), "{:?}", result.failures);
        assert_eq!(result.grid.len(), 5);
        assert!(result.grid.iter().all(|row| row.len() == 6));
        assert_eq!(result.rows.len(), 30);

        // Reproduce the ANN row's All cell through the public one-shot path.
        let rep_seed = derive_seed(33, &[MATRIX_TAG, 0]);
        let sizes = (200, 400);
        let data =
            cell_data(&cfg, Axis::FamilyMatrix, &AxisValue::Int(0), None, sizes, false, rep_seed)
                .unwrap();
        let split = make_split_with_eval_cap(
            &data,
            sizes.0,
            sizes.1,
            cfg.split.eval_cap,
            derive_seed(rep_seed, &[0x53]),
        )
        .unwrap();
        let target_data = data.subset(&split.target_train).unwrap();
        let target = train(
            &cfg.models.family_spec(Family::Ann),
            &target_data,
            derive_seed(rep_seed, &[0x54, 0]),
        )
        .unwrap();
        let direct = one_vs_all_attack(
            &target,
            &cfg.models.all_family_specs(),
            &split,
            &data,
            rep_seed,
        )
        .unwrap();
        assert_eq!(result.grid[0][5], Some(direct));
    }
}
