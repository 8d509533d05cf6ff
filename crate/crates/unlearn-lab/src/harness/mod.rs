//! Configuration, run orchestration, persistence, and experiment
//! reproduction: budget sweeps, strategy x algorithm grids, random-mask
//! controls, and criterion ablations, all expressed in one config file.

pub mod commands;
pub mod config;
pub mod hash;
pub mod layout;
pub mod manifest;
pub mod run;

pub use commands::{cmd_compare, cmd_evaluate, cmd_sweep, cmd_train, cmd_unlearn, enumerate_cells, Cell, RunFlags};
pub use config::{
    load_experiment, AlgorithmConfig, ConfigFile, DatasetConfig, Experiment, StrategyConfig,
    StrategyKind, OUTPUT_ROOT_ENV, SCHEMA_VERSION,
};
pub use hash::{content_hash, Fnv64};
pub use layout::{alpha_label, Layout, MANIFEST_FILE, MASK_FILE, METRICS_FILE, MODEL_FILE};
pub use manifest::Manifest;
pub use run::{
    build_strategy_mask, evaluate_model, prepare_data, run_over, split_for_seed, strategy_alphas,
    train_original, ExperimentData, MaskCache, MetricsFile,
};
