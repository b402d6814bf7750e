//! A laboratory for studying membership inference attacks (MIA) on small
//! tabular binary classifiers.
//!
//! The crate is organized around the attack pipeline:
//!
//! - [`dataset`]: ingest, synthesize, label, resample and split tabular data,
//!   and measure its properties (class/feature balance, entropy).
//! - [`models`]: five from-scratch classifier families (MLP, LR, kNN, RF, SVM)
//!   behind a uniform probability-vector prediction contract.
//! - [`attack`]: the shadow-model attack: build an attack dataset from a
//!   shadow model's IN/OUT predictions, train the attack classifier, and
//!   score membership inference against a target model.
//! - [`metrics`]: model-property measurements (mutual information between
//!   records and parameters, MIA-indistinguishability, three fairness
//!   deltas) plus rank/linear correlation.
//! - [`defense`]: train the target MLP with a property-derived regularizer
//!   and report accuracy / MIA-accuracy tables.
//! - [`harness`]: config-driven experiment runner behind the CLI
//!   (sweeps, target-by-shadow matrices, defense tables, reports).
//!
//! Everything is deterministic per seed: equal configs and seeds give
//! byte-identical result files.

pub mod attack;
pub mod dataset;
pub mod defense;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
