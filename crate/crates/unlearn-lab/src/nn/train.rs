//! Deterministic mini-batch training loop shared by original training, the
//! retrain oracle, and every finetuning-style unlearning algorithm.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DatasetView;
use crate::error::Result;
use crate::nn::autodiff::{loss_and_grads, LossSpec};
use crate::nn::model::Model;
use crate::nn::optimizer::{masked_sgd_step, OptimizerState};
use crate::nn::schedule::{schedule_lr, Schedule};

/// Everything one run of SGD needs.
#[derive(Debug, Clone)]
pub struct TrainLoopConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Schedule over optimizer steps; `total_steps` is overwritten with
    /// `epochs * batches_per_epoch` before the loop starts.
    pub schedule: Schedule,
    pub loss: LossSpec,
    pub negate: bool,
    /// Seed controlling the per-epoch batch order.
    pub seed: u64,
}

/// Mix a seed with an epoch tag so every epoch gets a fresh, reproducible
/// shuffle stream. SplitMix64 finalizer.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Shuffled view positions for one epoch, a pure function of (seed, epoch, n).
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Outcome of a training loop.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub steps_taken: usize,
    /// Batch loss at every optimizer step.
    pub loss_trace: Vec<f64>,
}

/// Run masked SGD over `data` for the configured number of epochs, updating
/// `model` in place. Parameters where `mask` is false are never written.
pub fn run_sgd(
    model: &mut Model,
    data: &DatasetView<'_>,
    mask: &[bool],
    cfg: &TrainLoopConfig,
) -> Result<TrainResult> {
    let n = data.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size.min(n).max(1));
    let total_steps = cfg.epochs * batches_per_epoch;
    let schedule = cfg.schedule.with_total_steps(total_steps.max(1));
    schedule.validate()?;
    let mut state = OptimizerState::new(model.param_count(), cfg.momentum, cfg.weight_decay)?;
    let mut loss_trace = Vec::with_capacity(total_steps);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(cfg.seed, epoch, n);
        for batch in data.batches_in_order(&order, cfg.batch_size.min(n).max(1)) {
            let lr = schedule_lr(&schedule, step);
            let (loss, grads) = loss_and_grads(model, &batch, &cfg.loss, cfg.negate)?;
            masked_sgd_step(model, &mut state, &grads, mask, lr)?;
            loss_trace.push(loss);
            step += 1;
        }
    }
    Ok(TrainResult {
        steps_taken: step,
        loss_trace,
    })
}
