//! Unlearning-quality and utility metrics: accuracies, membership inference
//! score, delta-vs-oracle reporting, and cross-seed aggregation.

pub mod accuracy;
pub mod aggregate;
pub mod delta;
pub mod mia;

pub use accuracy::accuracy;
pub use aggregate::{aggregate_rows, parse_csv, rows_to_csv, rows_to_text, AggregateRow, CellKey};
pub use delta::{delta_report, mean_ci95, t_critical_95, DeltaReport, DeltaStats, MetricsReport};
pub use mia::{
    extract_features, mia_score, true_negatives, FeatureKind, LinearAttacker, MIAResult,
};
