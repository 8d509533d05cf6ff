//! Masked SGD with momentum.

use crate::error::{Error, Result};
use crate::nn::model::Model;

/// Momentum state for one training run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    velocity: Vec<f64>,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(p: usize, momentum: f64, weight_decay: f64) -> Result<OptimizerState> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        if weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {weight_decay}"
            )));
        }
        Ok(OptimizerState {
            velocity: vec![0.0; p],
            momentum,
            weight_decay,
        })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Zero the velocity of the selected entries. Must be called after the
    /// corresponding parameters are reinitialized: stale momentum on fresh
    /// weights would push them along the old trajectory.
    pub fn reset_masked(&mut self, mask: &[bool]) {
        for (v, &m) in self.velocity.iter_mut().zip(mask) {
            if m {
                *v = 0.0;
            }
        }
    }
}

/// One SGD-with-momentum step restricted to the parameters where
/// `mask` is true. Masked-out parameters and their velocity entries are left
/// bit-identical.
pub fn masked_sgd_step(
    model: &mut Model,
    state: &mut OptimizerState,
    grads: &[f64],
    mask: &[bool],
    lr: f64,
) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
    }
    let p = model.param_count();
    if grads.len() != p || mask.len() != p || state.velocity.len() != p {
        return Err(Error::Dimension(format!(
            "step over p={p} got grads={}, mask={}, velocity={}",
            grads.len(),
            mask.len(),
            state.velocity.len()
        )));
    }
    let params = model.params_mut();
    for j in 0..p {
        if !mask[j] {
            continue;
        }
        let g = grads[j] + state.weight_decay * params[j] as f64;
        state.velocity[j] = state.momentum * state.velocity[j] + g;
        params[j] = (params[j] as f64 - lr * state.velocity[j]) as f32;
    }
    Ok(())
}
