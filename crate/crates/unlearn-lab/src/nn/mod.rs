//! Minimal deterministic differentiable engine: layered classifiers,
//! loss/gradient computation, masked SGD with momentum, learning-rate
//! schedules, parameter addressing, checkpoints, and a finite-difference
//! gradient oracle.

pub mod arch;
pub mod autodiff;
pub mod checkpoint;
pub mod model;
pub mod optimizer;
pub mod schedule;
pub mod train;

pub use arch::{ArchSpec, LayerSpec, Shape};
pub use autodiff::{
    finite_diff_grad, forward, loss_and_grads, perturbed_loss, Logits, LossKind, LossSpec,
};
pub use model::{reinit_params, Model, NeuronGroup, INIT_SCHEME};
pub use optimizer::{masked_sgd_step, OptimizerState};
pub use schedule::{schedule_lr, Schedule, ScheduleKind};
pub use train::{epoch_order, mix_seed, run_sgd, TrainLoopConfig, TrainResult};
