//! Experiment orchestration: declarative configs, sweeps over one dataset or
//! model axis at a time, the target-vs-shadow family matrix, and result
//! aggregation into CSV and markdown.
//!
//! A run is fully determined by its config plus the sweep seed. Cells execute
//! in declaration order and every trained model draws from a seed derived
//! from (base seed, axis index, repetition), so reruns reproduce results
//! byte-for-byte apart from wall-clock columns.

pub mod config;
pub mod report;
pub mod run;

pub use config::{
    Axis, AxisValue, CsvSource, DataConfig, DefenseConfig, ExperimentConfig, ModelsConfig,
    SplitConfig, SweepConfig,
};
pub use report::{
    aggregate, build_report, correlate, correlation_csv, matrix_csv, matrix_rows_csv,
    read_results_csv, results_csv, summary_csv, ColumnStats, CorrRow, LoadedRow, SummaryRow,
};
pub use run::{
    materialize, regularizer_for, run_matrix, run_sweep, ExperimentResult, FailedCell,
    MatrixResult, MatrixRow, ResultRow, SkippedCell,
};
