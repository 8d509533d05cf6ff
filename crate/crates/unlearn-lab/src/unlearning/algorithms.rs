//! The unlearning algorithms. Every algorithm takes an optional mask that
//! restricts which parameters it may update; parameters outside the mask are
//! bit-identical before and after, with one exception: reset+finetune also
//! trains the classifier layer.

use std::time::Instant;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, DatasetView};
use crate::error::{Error, Result};
use crate::localization::Mask;
use crate::nn::train::mix_seed;
use crate::nn::{
    epoch_order, loss_and_grads, masked_sgd_step, reinit_params, run_sgd, schedule_lr, LossSpec,
    Model, OptimizerState, TrainLoopConfig,
};
use crate::unlearning::config::{Algorithm, UnlearnConfig, UnlearnOutcome};

fn effective_bits(mask: Option<&Mask>, p: usize) -> Vec<bool> {
    match mask {
        Some(m) => m.bits.clone(),
        None => vec![true; p],
    }
}

fn loop_config(cfg: &UnlearnConfig, loss: LossSpec, negate: bool) -> TrainLoopConfig {
    TrainLoopConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        schedule: cfg.schedule,
        loss,
        negate,
        seed: cfg.seed,
    }
}

/// Reset + Finetune: reinitialize the masked parameters, then finetune them
/// plus the classifier layer on the retain set. The mask is required.
pub fn reset_finetune(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    let mask = mask.ok_or_else(|| Error::Config("reset+finetune requires a mask".into()))?;
    cfg.validate()?;
    let start = Instant::now();
    let mut unlearned = reinit_params(model, &mask.bits, mix_seed(cfg.seed, 0x4e17));
    // trainable set = mask union classifier layer; velocity starts at zero
    // inside run_sgd, which covers the reinit contract
    let mut bits = mask.bits.clone();
    for j in unlearned.classifier_range() {
        bits[j] = true;
    }
    let result = run_sgd(
        &mut unlearned,
        retain,
        &bits,
        &loop_config(cfg, LossSpec::cross_entropy(), false),
    )?;
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// Finetune on the retain set (optionally masked). No reinitialization.
pub fn finetune(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut unlearned = model.clone();
    let bits = effective_bits(mask, model.param_count());
    let result = run_sgd(
        &mut unlearned,
        retain,
        &bits,
        &loop_config(cfg, LossSpec::cross_entropy(), false),
    )?;
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// Gradient ascent on the forget set (optionally masked).
pub fn neggrad(
    model: &Model,
    mask: Option<&Mask>,
    forget: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut unlearned = model.clone();
    let bits = effective_bits(mask, model.param_count());
    let result = run_sgd(
        &mut unlearned,
        forget,
        &bits,
        &loop_config(cfg, LossSpec::cross_entropy(), true),
    )?;
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// Joint descent on retain and ascent on forget: each step samples one batch
/// of each and applies `beta * g_retain - (1 - beta) * g_forget`.
pub fn neggrad_plus(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    forget: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    if retain.is_empty() || forget.is_empty() {
        return Err(Error::Empty(
            "joint descent/ascent needs non-empty retain and forget sets".into(),
        ));
    }
    let start = Instant::now();
    let mut unlearned = model.clone();
    let bits = effective_bits(mask, model.param_count());
    let mut state = OptimizerState::new(model.param_count(), cfg.momentum, cfg.weight_decay)?;
    let loss = LossSpec::cross_entropy();
    let beta = cfg.beta;

    let retain_bs = cfg.batch_size.min(retain.len()).max(1);
    let forget_bs = cfg.batch_size.min(forget.len()).max(1);
    let batches_per_epoch = retain.len().div_ceil(retain_bs);
    let schedule = cfg
        .schedule
        .with_total_steps((cfg.epochs * batches_per_epoch).max(1));
    let mut loss_trace = Vec::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let retain_order = epoch_order(cfg.seed, epoch, retain.len());
        let forget_order = epoch_order(mix_seed(cfg.seed, 0xf0a9), epoch, forget.len());
        let retain_batches = retain.batches_in_order(&retain_order, retain_bs);
        let forget_batches = forget.batches_in_order(&forget_order, forget_bs);
        let mut forget_iter = forget_batches.iter().cycle();
        for rb in &retain_batches {
            let fb = forget_iter.next().expect("cycle never ends");
            let lr = schedule_lr(&schedule, step);
            let (loss_r, g_r) = loss_and_grads(&unlearned, rb, &loss, false)?;
            let (loss_f, g_f) = loss_and_grads(&unlearned, fb, &loss, false)?;
            let combined: Vec<f64> = g_r
                .iter()
                .zip(&g_f)
                .map(|(&r, &f)| beta * r - (1.0 - beta) * f)
                .collect();
            masked_sgd_step(&mut unlearned, &mut state, &combined, &bits, lr)?;
            loss_trace.push(beta * loss_r - (1.0 - beta) * loss_f);
            step += 1;
        }
    }
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: step,
        loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// Draw a replacement label uniformly from the classes other than `original`.
fn random_other_label(rng: &mut ChaCha8Rng, original: u32, num_classes: usize) -> u32 {
    let draw = rng.random_range(0..num_classes as u32 - 1);
    if draw >= original {
        draw + 1
    } else {
        draw
    }
}

/// Relabel the forget examples once (uniformly over the other classes), then
/// descend on retain plus the relabeled forget set.
pub fn random_label(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    forget: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    let num_classes = model.num_classes();
    if num_classes < 2 {
        return Err(Error::Config(
            "random relabeling needs at least 2 classes".into(),
        ));
    }
    if forget.is_empty() {
        return Err(Error::Empty("random relabeling needs a non-empty forget set".into()));
    }
    let start = Instant::now();

    // materialize retain + relabeled forget into one dataset
    let retain_batch = retain.full_batch();
    let forget_batch = forget.full_batch();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x21ab));
    let mut features = retain_batch.features;
    let mut labels = retain_batch.labels;
    features.extend_from_slice(&forget_batch.features);
    for &original in &forget_batch.labels {
        labels.push(random_other_label(&mut rng, original, num_classes));
    }
    let combined = Dataset::new(
        "retain+relabeled",
        features,
        labels,
        retain.feature_len(),
        num_classes,
    )?;

    let mut unlearned = model.clone();
    let bits = effective_bits(mask, model.param_count());
    let result = run_sgd(
        &mut unlearned,
        &combined.view(),
        &bits,
        &loop_config(cfg, LossSpec::cross_entropy(), false),
    )?;
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// The relabeling used by [`random_label`], exposed for tests.
pub fn relabel_forget(labels: &[u32], num_classes: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x21ab));
    labels
        .iter()
        .map(|&l| random_other_label(&mut rng, l, num_classes))
        .collect()
}

/// Finetune on retain with an L1 penalty over all parameters.
pub fn l1_sparse(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut unlearned = model.clone();
    let bits = effective_bits(mask, model.param_count());
    let result = run_sgd(
        &mut unlearned,
        retain,
        &bits,
        &loop_config(cfg, LossSpec::cross_entropy().with_l1(cfg.l1_lambda), false),
    )?;
    Ok(UnlearnOutcome {
        model: unlearned,
        steps_taken: result.steps_taken,
        loss_trace: result.loss_trace,
        config_echo: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

/// Dispatch an unlearning algorithm by name. The retrain oracle is not
/// dispatched here: it builds a fresh model instead of post-processing one.
pub fn run_algorithm(
    model: &Model,
    mask: Option<&Mask>,
    retain: &DatasetView<'_>,
    forget: &DatasetView<'_>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    match cfg.algorithm {
        Algorithm::Rft => reset_finetune(model, mask, retain, cfg),
        Algorithm::Finetune => finetune(model, mask, retain, cfg),
        Algorithm::Neggrad => neggrad(model, mask, forget, cfg),
        Algorithm::NeggradPlus => neggrad_plus(model, mask, retain, forget, cfg),
        Algorithm::RandomLabel => random_label(model, mask, retain, forget, cfg),
        Algorithm::L1Sparse => l1_sparse(model, mask, retain, cfg),
        Algorithm::RetrainOracle => Err(Error::Config(
            "retrain_oracle builds a fresh model; call unlearning::retrain_oracle".into(),
        )),
    }
}
