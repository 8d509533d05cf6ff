//! A self-contained laboratory for localized machine unlearning.
//!
//! The pipeline trains small classifiers, localizes forget-set-critical
//! parameters via weighted-gradient channel criticality and competing
//! strategies, applies masked unlearning algorithms, and scores unlearning
//! quality against a retrain-from-scratch oracle.
//!
//! Modules:
//!
//! - [`nn`] - deterministic differentiable engine: dense/conv classifiers,
//!   masked SGD with momentum, schedules, checkpoints, and a
//!   finite-difference gradient oracle.
//! - [`data`] - dataset loading (IDX, CSV, synthetic Gaussians), forget-set
//!   construction, and the MIA calibration subset.
//! - [`localization`] - criticality scores over criteria and granularities,
//!   and budgeted mask construction for every strategy.
//! - [`unlearning`] - masked unlearning algorithms and the retrain oracle.
//! - [`evaluation`] - accuracies, membership-inference score, delta-vs-oracle
//!   reports with confidence intervals.
//! - [`harness`] - config files, run orchestration, persistence, sweeps.
//!
//! The `examples/` directory holds one runnable example per capability; the
//! `unlearn-lab` binary exposes the same flows as subcommands.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod localization;
pub mod nn;
pub mod unlearning;

pub use error::{Error, Result};
