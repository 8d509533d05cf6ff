//! Unlearning algorithms, each accepting an optional mask that restricts
//! parameter updates, plus the retrain-from-scratch oracle.

pub mod algorithms;
pub mod config;
pub mod oracle;

pub use algorithms::{
    finetune, l1_sparse, neggrad, neggrad_plus, random_label, relabel_forget, reset_finetune,
    run_algorithm,
};
pub use config::{Algorithm, UnlearnConfig, UnlearnOutcome};
pub use oracle::{retrain_oracle, TrainRecipe};
