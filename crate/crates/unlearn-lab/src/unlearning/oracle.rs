//! Retrain-from-scratch oracle: the gold standard every metric compares
//! against. Trains a fresh model on the retain set only; it never sees a
//! forget example.

use std::time::Instant;

use crate::data::DatasetView;
use crate::error::Result;
use crate::nn::{run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};
use crate::unlearning::config::{Algorithm, UnlearnConfig, UnlearnOutcome};

/// Recipe for the original training run; the oracle derives its defaults
/// from it (shorter horizon, half the learning rate).
#[derive(Debug, Clone)]
pub struct TrainRecipe {
    pub epochs: usize,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl TrainRecipe {
    /// Oracle defaults: epochs scaled down by 2.5x, learning rate halved.
    pub fn oracle_defaults(&self) -> TrainRecipe {
        TrainRecipe {
            epochs: ((self.epochs as f64 / 2.5).round() as usize).max(1),
            schedule: self.schedule.with_lr(self.schedule.lr_init * 0.5),
            ..self.clone()
        }
    }
}

/// Train a model from scratch (seeded init) on `retain` only.
pub fn retrain_oracle(
    retain: &DatasetView<'_>,
    arch: &ArchSpec,
    recipe: &TrainRecipe,
    seed: u64,
) -> Result<UnlearnOutcome> {
    let start = Instant::now();
    let mut model = Model::init(arch.clone(), seed)?;
    let mask = vec![true; model.param_count()];
    let result = run_sgd(
        &mut model,
        retain,
        &mask,
        &TrainLoopConfig {
            epochs: recipe.epochs,
            batch_size: recipe.batch_size,
            momentum: recipe.momentum,
            weight_decay: recipe.weight_decay,
            schedule: recipe.schedule,
            loss: LossSpec::cross_entropy(),
            negate: false,
            seed,
        },
    )?;
    let config_echo = UnlearnConfig {
        algorithm: Algorithm::RetrainOracle,
        epochs: recipe.epochs,
        schedule: recipe.schedule,
        batch_size: recipe.batch_size,
        momentum: recipe.momentum,
        weight_decay: recipe.weight_decay,
        l1_lambda: 0.0,
        beta: 0.95,
        seed,
    };
    Ok(UnlearnOutcome {
        model,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo,
        wall_time: start.elapsed(),
    })
}
