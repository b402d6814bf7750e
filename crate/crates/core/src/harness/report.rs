//! Result files, aggregation, correlation, and the markdown report.
//!
//! File formats are plain CSV with a fixed column order. Floats are written
//! in their shortest round-trip form, so equal runs produce byte-identical
//! files; the wall-time column is always last and is the only
//! nondeterministic one.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::Axis;
use crate::harness::run::{ExperimentResult, MatrixResult, ResultRow};
use crate::metrics::{pearson_r, spearman_r};
use crate::stats::{ci95_half_width, mean, sample_std};

pub const RESULTS_HEADER: &str = "axis,value,repetition,seed,mia_acc,train_acc,test_acc,\
    class_balance,feature_balance,entropy,num_features,num_records,\
    delta_g,delta_p,delta_i,delta_mi,group_feature,wall_ms";

const SUMMARY_HEADER: &str = "value,n,degenerate,\
    mia_mean,mia_std,mia_ci95,mia_min,mia_max,\
    train_mean,train_std,train_ci95,train_min,train_max,\
    test_mean,test_std,test_ci95,test_min,test_max";

/// Sweep rows as CSV text.
pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in &result.rows {
        let delta_p = r.delta_p.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.repetition,
            r.seed,
            r.mia_acc,
            r.train_acc,
            r.test_acc,
            r.properties.class_balance,
            r.properties.feature_balance,
            r.properties.entropy,
            r.properties.num_features,
            r.properties.num_records,
            r.delta_g,
            delta_p,
            r.delta_i,
            r.delta_mi,
            r.group_feature,
            r.wall_ms,
        );
    }
    out
}

/// A results CSV read back for correlation and reporting; only the columns
/// those consumers need.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRow {
    pub axis: String,
    pub value: String,
    pub mia_acc: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub class_balance: f64,
    pub feature_balance: f64,
    pub entropy: f64,
    pub num_features: f64,
    pub delta_g: f64,
    pub delta_p: Option<f64>,
    pub delta_i: f64,
    pub delta_mi: f64,
}

pub fn read_results_csv(path: &Path) -> Result<Vec<LoadedRow>> {
    let text = fs::read_to_string(path)?;
    parse_results_csv(&text)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}

fn parse_results_csv(text: &str) -> std::result::Result<Vec<LoadedRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header != RESULTS_HEADER {
        return Err("not a sweep results file".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 18 {
            return Err(format!("row {}: expected 18 columns, got {}", i + 2, cells.len()));
        }
        let f = |j: usize| -> std::result::Result<f64, String> {
            cells[j].parse::<f64>().map_err(|e| format!("row {}: column {j}: {e}", i + 2))
        };
        rows.push(LoadedRow {
            axis: cells[0].to_string(),
            value: cells[1].to_string(),
            mia_acc: f(4)?,
            train_acc: f(5)?,
            test_acc: f(6)?,
            class_balance: f(7)?,
            feature_balance: f(8)?,
            entropy: f(9)?,
            num_features: f(10)?,
            delta_g: f(12)?,
            delta_p: if cells[13].is_empty() { None } else { Some(f(13)?) },
            delta_i: f(14)?,
            delta_mi: f(15)?,
        });
    }
    Ok(rows)
}

/// Five-number summary of one measured column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
    pub min: f64,
    pub max: f64,
}

fn column_stats(xs: &[f64]) -> ColumnStats {
    ColumnStats {
        mean: mean(xs),
        std: sample_std(xs),
        ci95: ci95_half_width(xs),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Aggregates for one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: String,
    pub n: usize,
    /// Single repetition: the t-interval is undefined and reported as zero.
    pub degenerate: bool,
    pub mia: ColumnStats,
    pub train: ColumnStats,
    pub test: ColumnStats,
}

/// Per-value mean/std/CI/min/max of MIA and model accuracies, in the order
/// the values first appear.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        let key = r.value.to_string();
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|value| {
            let cell: Vec<&ResultRow> =
                rows.iter().filter(|r| r.value.to_string() == value).collect();
            let pick = |f: fn(&ResultRow) -> f64| -> Vec<f64> { cell.iter().map(|r| f(r)).collect() };
            SummaryRow {
                n: cell.len(),
                degenerate: cell.len() < 2,
                mia: column_stats(&pick(|r| r.mia_acc)),
                train: column_stats(&pick(|r| r.train_acc)),
                test: column_stats(&pick(|r| r.test_acc)),
                value,
            }
        })
        .collect()
}

pub fn summary_csv(summaries: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let cols = |c: &ColumnStats| format!("{},{},{},{},{}", c.mean, c.std, c.ci95, c.min, c.max);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.value,
            s.n,
            s.degenerate,
            cols(&s.mia),
            cols(&s.train),
            cols(&s.test)
        );
    }
    out
}

/// Matrix grid as CSV: one row per target family, `failed` for dead cells.
pub fn matrix_csv(result: &MatrixResult) -> String {
    let mut out = String::from("target");
    for s in &result.shadows {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for (t, family) in crate::models::Family::ALL.iter().enumerate() {
        let _ = write!(out, "{}", family.name());
        for cell in &result.grid[t] {
            match cell {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push_str(",failed"),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-repetition matrix samples.
pub fn matrix_rows_csv(result: &MatrixResult) -> String {
    let mut out = String::from("target,shadow,repetition,seed,mia_acc,wall_ms\n");
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.target.name(),
            r.shadow,
            r.repetition,
            r.seed,
            r.mia_acc,
            r.wall_ms
        );
    }
    out
}

/// Correlation of one measured column against MIA accuracy over pooled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrRow {
    pub metric: &'static str,
    pub n: usize,
    /// `None` when undefined (constant column or too few rows).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Pools rows and correlates each property / fairness / accuracy column
/// with MIA accuracy, Table-4 style.
pub fn correlate(rows: &[LoadedRow]) -> Vec<CorrRow> {
    let metrics: [(&'static str, fn(&LoadedRow) -> Option<f64>); 10] = [
        ("class_balance", |r| Some(r.class_balance)),
        ("feature_balance", |r| Some(r.feature_balance)),
        ("entropy", |r| Some(r.entropy)),
        ("num_features", |r| Some(r.num_features)),
        ("delta_g", |r| Some(r.delta_g)),
        ("delta_p", |r| r.delta_p),
        ("delta_i", |r| Some(r.delta_i)),
        ("delta_mi", |r| Some(r.delta_mi)),
        ("train_acc", |r| Some(r.train_acc)),
        ("generalization_gap", |r| Some(r.train_acc - r.test_acc)),
    ];
    metrics
        .into_iter()
        .map(|(name, get)| {
            let pairs: Vec<(f64, f64)> =
                rows.iter().filter_map(|r| get(r).map(|x| (x, r.mia_acc))).collect();
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            CorrRow {
                metric: name,
                n: pairs.len(),
                pearson: pearson_r(&xs, &ys).ok(),
                spearman: spearman_r(&xs, &ys).ok(),
            }
        })
        .collect()
}

pub fn correlation_csv(rows: &[CorrRow]) -> String {
    let mut out = String::from("metric,n,pearson,spearman\n");
    for r in rows {
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.metric, r.n, fmt(r.pearson), fmt(r.spearman));
    }
    out
}

/// Markdown report over any mix of result files (sweep rows, matrix grids,
/// defense tables), plus one plot-ready series CSV per sweep axis.
///
/// Returns the markdown text and the series files as (name, contents).
pub fn build_report(inputs: &[(String, String)]) -> Result<(String, Vec<(String, String)>)> {
    let mut md = String::from("# Experiment report\n");
    let mut series: Vec<(String, String)> = Vec::new();
    for (name, text) in inputs {
        let _ = writeln!(md, "\n## {name}\n");
        let first = text.lines().next().unwrap_or_default();
        if first == RESULTS_HEADER {
            report_sweep(&mut md, &mut series, text)?;
        } else if first.starts_with("target,") {
            md.push_str(&markdown_table(text));
        } else if first.starts_with("regularizer,") {
            report_defense(&mut md, text);
        } else {
            let _ = writeln!(md, "unrecognized file format, skipped");
        }
    }
    Ok((md, series))
}

fn report_sweep(
    md: &mut String,
    series: &mut Vec<(String, String)>,
    text: &str,
) -> Result<()> {
    let rows = parse_results_csv(text).map_err(Error::InvalidData)?;
    if rows.is_empty() {
        md.push_str("no rows\n");
        return Ok(());
    }
    // One table and one series file per axis present in the file.
    let mut axes: Vec<String> = Vec::new();
    for r in &rows {
        if !axes.contains(&r.axis) {
            axes.push(r.axis.clone());
        }
    }
    for axis in axes {
        let slice: Vec<&LoadedRow> = rows.iter().filter(|r| r.axis == axis).collect();
        let mut values: Vec<String> = Vec::new();
        for r in &slice {
            if !values.contains(&r.value) {
                values.push(r.value.clone());
            }
        }
        let _ = writeln!(md, "### Sweep: {axis}\n");
        let _ = writeln!(md, "| {axis} | n | MIA accuracy | 95% CI | train | test |");
        md.push_str("|---|---|---|---|---|---|\n");
        let mut series_csv = String::from("value,mia_mean,mia_ci95_lo,mia_ci95_hi\n");
        for value in &values {
            let mias: Vec<f64> =
                slice.iter().filter(|r| &r.value == value).map(|r| r.mia_acc).collect();
            let trains: Vec<f64> =
                slice.iter().filter(|r| &r.value == value).map(|r| r.train_acc).collect();
            let tests: Vec<f64> =
                slice.iter().filter(|r| &r.value == value).map(|r| r.test_acc).collect();
            let m = mean(&mias);
            let ci = ci95_half_width(&mias);
            let _ = writeln!(
                md,
                "| {value} | {} | {:.4} | ±{:.4} | {:.4} | {:.4} |",
                mias.len(),
                m,
                ci,
                mean(&trains),
                mean(&tests)
            );
            let _ = writeln!(series_csv, "{value},{m},{},{}", m - ci, m + ci);
        }
        series.push((format!("series_{axis}.csv"), series_csv));
    }
    Ok(())
}

fn report_defense(md: &mut String, text: &str) {
    let mut lines = text.lines();
    let Some(_header) = lines.next() else {
        md.push_str("no rows\n");
        return;
    };
    md.push_str("| Regularizer | lambda | Train acc | Test acc | MIA acc | Max diff |\n");
    md.push_str("|---|---|---|---|---|---|\n");
    let mut any = false;
    for line in lines {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 10 {
            continue;
        }
        any = true;
        let pm = |v: &str, ci: &str| {
            let (v, ci): (f64, f64) =
                (v.parse().unwrap_or(f64::NAN), ci.parse().unwrap_or(f64::NAN));
            format!("{v:.4} ± {ci:.4}")
        };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            c[0],
            c[1],
            pm(c[2], c[3]),
            pm(c[4], c[5]),
            pm(c[6], c[7]),
            pm(c[8], c[9]),
        );
    }
    if !any {
        md.push_str("\nno rows\n");
    }
}

/// Renders a small CSV verbatim as a markdown table.
fn markdown_table(text: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        out.push_str("| ");
        out.push_str(&cells.join(" | "));
        out.push_str(" |\n");
        if i == 0 {
            out.push_str(&"|---".repeat(cells.len()));
            out.push_str("|\n");
        }
    }
    out
}

/// `Axis` helper for naming series files from a parsed config.
pub fn series_file_name(axis: Axis) -> String {
    format!("series_{axis}.csv")
}
