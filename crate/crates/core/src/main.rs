//! Command-line front end: dataset analysis, single attack runs, sweeps,
//! the family matrix, the defense table, correlation, and reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mia_lab::attack::{one_vs_all_attack, run_attack_pipeline};
use mia_lab::dataset::{
    load_csv, measure_properties, synthesize_with, TabularDataset, DEFAULT_BINS,
};
use mia_lab::defense::{defense_table_csv, run_defense_table};
use mia_lab::harness::{
    build_report, correlate, correlation_csv, materialize, matrix_csv, matrix_rows_csv,
    read_results_csv, results_csv, run_matrix, run_sweep, summary_csv, ExperimentConfig, LoadedRow,
};
use mia_lab::harness::report::aggregate;
use mia_lab::models::{evaluate_on, train};
use mia_lab::seed::derive_seed;

#[derive(Parser)]
#[command(name = "mia-lab", version, about = "Membership-inference lab for tabular classifiers")]
struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Exit 0 even when some cells failed.
    #[arg(long, global = true)]
    keep_going: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure dataset properties and print the report as JSON.
    Analyze {
        /// A csv file, or an experiment config whose data section to use.
        data: PathBuf,
        /// Label column for raw csv input.
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Quantile bins for numeric csv columns.
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Numeric label threshold for raw csv input (default: lexicographic).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run one attack pipeline against the configured target.
    Attack {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train the union attack over all five shadow families.
        #[arg(long)]
        all: bool,
    },
    /// Sweep one axis; writes results.csv, summary.csv and a config sidecar.
    Sweep { config: PathBuf },
    /// Target-vs-shadow family grid; writes matrix.csv and matrix_rows.csv.
    Matrix { config: PathBuf },
    /// Defense table over regularizer kinds; writes defense.csv and defense.json.
    Defend {
        config: PathBuf,
        /// Regularizer kinds to run (default: the config's list, or all).
        #[arg(long)]
        kind: Vec<String>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Penalty form: abs_exp_r or sq_r.
        #[arg(long)]
        form: Option<String>,
        /// Training epochs (k).
        #[arg(long)]
        epochs: Option<usize>,
        /// Probe models per epoch (l).
        #[arg(long)]
        probes: Option<usize>,
        /// Records sampled per probe (m).
        #[arg(long)]
        sample_size: Option<usize>,
        /// Protected feature index (default: top label-informative feature).
        #[arg(long)]
        group_feature: Option<usize>,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Seed for data synthesis / resampling.
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
    },
    /// Pool sweep results and correlate each measured property with MIA accuracy.
    Correlate {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Render result files into a markdown report plus plot-ready series CSVs.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(clean) => {
            if clean || cli.keep_going {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Runs the subcommand; `Ok(false)` means it finished with failed cells.
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Analyze { data, label_column, bins, threshold } => {
            let data = load_any_data(data, label_column, *bins, *threshold)?;
            let report = measure_properties(&data)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Attack { config, seed, all } => cmd_attack(config, *seed, *all),
        Command::Sweep { config } => cmd_sweep(cli, config),
        Command::Matrix { config } => cmd_matrix(cli, config),
        Command::Defend {
            config,
            kind,
            lambda,
            form,
            epochs,
            probes,
            sample_size,
            group_feature,
            seeds,
            data_seed,
        } => {
            let mut cfg = load_config(config)?;
            let mut d = cfg.defense.take().unwrap_or_default();
            if !kind.is_empty() {
                d.kinds = kind.clone();
            }
            if let Some(v) = lambda {
                d.lambda = *v;
            }
            if let Some(v) = form {
                d.form = v.clone();
            }
            if let Some(v) = epochs {
                d.epochs = *v;
            }
            if let Some(v) = probes {
                d.probes = *v;
            }
            if let Some(v) = sample_size {
                d.sample_size = *v;
            }
            if group_feature.is_some() {
                d.group_feature = *group_feature;
            }
            if !seeds.is_empty() {
                d.seeds = seeds.clone();
            }
            cfg.defense = Some(d);
            cmd_defend(cli, &cfg, *data_seed)
        }
        Command::Correlate { results } => cmd_correlate(cli, results),
        Command::Report { results } => cmd_report(cli, results),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path)
        .with_context(|| format!("loading config {}", path.display()))
}

fn load_any_data(
    path: &Path,
    label_column: &str,
    bins: usize,
    threshold: Option<f64>,
) -> Result<TabularDataset> {
    if path.extension().map(|e| e == "toml").unwrap_or(false) {
        let cfg = load_config(path)?;
        if let Some(src) = &cfg.data.csv {
            let (data, _) = load_csv(&src.path, &src.label_column, src.bins, src.label_threshold)?;
            Ok(data)
        } else {
            Ok(synthesize_with(&cfg.data.synth())?)
        }
    } else {
        let (data, report) = load_csv(path, label_column, bins, threshold)?;
        eprintln!(
            "read {} rows, kept {}, dropped {} with missing values",
            report.rows_read, report.rows_kept, report.dropped_missing
        );
        Ok(data)
    }
}

fn cmd_attack(config: &Path, seed: u64, all: bool) -> Result<bool> {
    let cfg = load_config(config)?;
    let (data, split) = materialize(&cfg, seed)?;
    let target_spec = cfg.models.target.clone();
    let target_data = data.subset(&split.target_train)?;
    let target = train(&target_spec, &target_data, derive_seed(seed, &[0x54]))?;
    let attack_seed = derive_seed(seed, &[0x41]);
    let mia_acc = if all {
        one_vs_all_attack(&target, &cfg.models.all_family_specs(), &split, &data, attack_seed)?
    } else {
        let shadow = cfg.models.shadow.clone().unwrap_or_else(|| target_spec.clone());
        run_attack_pipeline(&target, &shadow, &split, &data, attack_seed)?
    };
    let out = serde_json::json!({
        "seed": seed,
        "shadow": if all { "all".to_string() } else { "mimic".to_string() },
        "mia_acc": mia_acc,
        "train_acc": evaluate_on(&target, &data, &split.target_train),
        "test_acc": evaluate_on(&target, &data, &split.target_holdout),
        "properties": measure_properties(&data)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn cmd_sweep(cli: &Cli, config: &Path) -> Result<bool> {
    let cfg = load_config(config)?;
    let result = run_sweep(&cfg)?;
    fs::create_dir_all(&cli.out)?;
    write_out(cli, "results.csv", &results_csv(&result))?;
    write_out(cli, "summary.csv", &summary_csv(&aggregate(&result.rows)))?;
    write_out(cli, "results.config.json", &result.config_json)?;
    if !result.skipped.is_empty() {
        let mut log = String::new();
        for s in &result.skipped {
            log.push_str(&format!("{} rep {}: {}\n", s.value, s.repetition, s.reason));
        }
        write_out(cli, "skipped.log", &log)?;
    }
    for f in &result.failures {
        eprintln!("failed cell {} rep {}: {}", f.value, f.repetition, f.error);
    }
    eprintln!(
        "{} rows, {} skipped, {} failed -> {}",
        result.rows.len(),
        result.skipped.len(),
        result.failures.len(),
        cli.out.display()
    );
    Ok(result.failures.is_empty())
}

fn cmd_matrix(cli: &Cli, config: &Path) -> Result<bool> {
    let cfg = load_config(config)?;
    let result = run_matrix(&cfg)?;
    fs::create_dir_all(&cli.out)?;
    write_out(cli, "matrix.csv", &matrix_csv(&result))?;
    write_out(cli, "matrix_rows.csv", &matrix_rows_csv(&result))?;
    write_out(cli, "matrix.config.json", &result.config_json)?;
    for f in &result.failures {
        eprintln!("failed cell: {f}");
    }
    eprintln!("matrix written -> {}", cli.out.display());
    Ok(result.failures.is_empty())
}

fn cmd_defend(cli: &Cli, cfg: &ExperimentConfig, data_seed: u64) -> Result<bool> {
    let defense = cfg.defense();
    let kinds = defense.reg_kinds()?;
    let form = defense.reg_form()?;
    let regs = kinds
        .iter()
        .map(|&k| mia_lab::harness::regularizer_for(k, defense.lambda, form))
        .collect::<mia_lab::Result<Vec<_>>>()?;
    let (data, split) = materialize(cfg, data_seed)?;
    let rows = run_defense_table(
        &cfg.models.target,
        &data,
        &split,
        &regs,
        &defense.params(),
        &defense.seeds,
    )?;
    fs::create_dir_all(&cli.out)?;
    write_out(cli, "defense.csv", &defense_table_csv(&rows))?;
    write_out(cli, "defense.json", &serde_json::to_string_pretty(&rows)?)?;
    write_out(cli, "defense.config.json", &cfg.resolved_json())?;
    eprintln!("{} regularizer rows -> {}", rows.len(), cli.out.display());
    Ok(true)
}

fn cmd_correlate(cli: &Cli, results: &[PathBuf]) -> Result<bool> {
    let mut pooled: Vec<LoadedRow> = Vec::new();
    for path in results {
        pooled.extend(read_results_csv(path)?);
    }
    if pooled.is_empty() {
        bail!("no rows in the given result files");
    }
    let table = correlate(&pooled);
    let text = correlation_csv(&table);
    print!("{text}");
    fs::create_dir_all(&cli.out)?;
    write_out(cli, "correlation.csv", &text)?;
    Ok(true)
}

fn cmd_report(cli: &Cli, results: &[PathBuf]) -> Result<bool> {
    let mut inputs = Vec::new();
    for path in results {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        inputs.push((name, text));
    }
    let (md, series) = build_report(&inputs)?;
    fs::create_dir_all(&cli.out)?;
    write_out(cli, "report.md", &md)?;
    for (name, text) in &series {
        write_out(cli, name, text)?;
    }
    eprintln!("report.md and {} series files -> {}", series.len(), cli.out.display());
    Ok(true)
}

fn write_out(cli: &Cli, name: &str, text: &str) -> Result<()> {
    let path = cli.out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
