//! Unlearning run configuration and outcome types.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Model, Schedule, ScheduleKind};

/// The unlearning algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Reinitialize masked parameters, then finetune them plus the
    /// classifier layer on the retain set.
    Rft,
    /// Gradient descent on the retain set.
    Finetune,
    /// Gradient ascent on the forget set.
    Neggrad,
    /// Simultaneous descent on retain and ascent on forget.
    NeggradPlus,
    /// Random relabeling of the forget set, then descent on retain plus the
    /// relabeled forget set.
    RandomLabel,
    /// Finetune with an L1 penalty on all parameters.
    L1Sparse,
    /// Train from scratch on the retain set only; the gold standard.
    RetrainOracle,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rft => "rft",
            Algorithm::Finetune => "finetune",
            Algorithm::Neggrad => "neggrad",
            Algorithm::NeggradPlus => "neggrad_plus",
            Algorithm::RandomLabel => "random_label",
            Algorithm::L1Sparse => "l1_sparse",
            Algorithm::RetrainOracle => "retrain_oracle",
        }
    }

    pub fn parse(name: &str) -> Result<Algorithm> {
        Ok(match name {
            "rft" => Algorithm::Rft,
            "finetune" => Algorithm::Finetune,
            "neggrad" => Algorithm::Neggrad,
            "neggrad_plus" => Algorithm::NeggradPlus,
            "random_label" => Algorithm::RandomLabel,
            "l1_sparse" => Algorithm::L1Sparse,
            "retrain_oracle" => Algorithm::RetrainOracle,
            other => return Err(Error::Config(format!("unknown algorithm '{other}'"))),
        })
    }

    /// Schedule shape each algorithm is tuned with: cosine to 1% for
    /// finetuning-style algorithms, cosine to 50% for random label, constant
    /// for the gradient-ascent family.
    pub fn default_schedule_kind(&self) -> (ScheduleKind, f64) {
        match self {
            Algorithm::Neggrad | Algorithm::NeggradPlus => (ScheduleKind::Constant, 1.0),
            Algorithm::RandomLabel => (ScheduleKind::Cosine, 0.5),
            _ => (ScheduleKind::Cosine, 0.01),
        }
    }
}

/// Hyperparameters of one unlearning run.
#[derive(Debug, Clone)]
pub struct UnlearnConfig {
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// L1 penalty coefficient; only meaningful (and required > 0) for L1Sparse.
    pub l1_lambda: f64,
    /// Descent/ascent mixing weight in (0, 1] for NeggradPlus.
    pub beta: f64,
    pub seed: u64,
}

impl UnlearnConfig {
    /// A config with sensible desk-scale defaults for `algorithm`.
    pub fn new(algorithm: Algorithm, epochs: usize, lr: f64, batch_size: usize, seed: u64) -> Self {
        let (kind, eta_min_frac) = algorithm.default_schedule_kind();
        UnlearnConfig {
            algorithm,
            epochs,
            schedule: Schedule {
                kind,
                lr_init: lr,
                eta_min_frac,
                total_steps: 1,
            },
            batch_size,
            momentum: 0.9,
            weight_decay: 0.0,
            l1_lambda: if algorithm == Algorithm::L1Sparse { 1e-4 } else { 0.0 },
            beta: 0.95,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        match self.algorithm {
            Algorithm::L1Sparse => {
                if self.l1_lambda <= 0.0 {
                    return Err(Error::Config(format!(
                        "l1_sparse needs l1_lambda > 0, got {}",
                        self.l1_lambda
                    )));
                }
            }
            _ => {
                if self.l1_lambda != 0.0 {
                    return Err(Error::Config(format!(
                        "l1_lambda is only valid for l1_sparse, got {} for {}",
                        self.l1_lambda,
                        self.algorithm.name()
                    )));
                }
            }
        }
        if self.algorithm == Algorithm::NeggradPlus && !(0.0 < self.beta && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "neggrad_plus needs beta in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// What an unlearning run produced.
#[derive(Debug, Clone)]
pub struct UnlearnOutcome {
    pub model: Model,
    pub steps_taken: usize,
    pub loss_trace: Vec<f64>,
    pub config_echo: UnlearnConfig,
    pub wall_time: Duration,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_lambda_rules() {
        let mut cfg = UnlearnConfig::new(Algorithm::L1Sparse, 1, 0.1, 8, 0);
        assert!(cfg.validate().is_ok());
        cfg.l1_lambda = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = UnlearnConfig::new(Algorithm::Finetune, 1, 0.1, 8, 0);
        assert!(cfg.validate().is_ok());
        cfg.l1_lambda = 0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn beta_range_for_neggrad_plus() {
        let mut cfg = UnlearnConfig::new(Algorithm::NeggradPlus, 1, 0.1, 8, 0);
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        cfg.beta = 1.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in [
            Algorithm::Rft,
            Algorithm::Finetune,
            Algorithm::Neggrad,
            Algorithm::NeggradPlus,
            Algorithm::RandomLabel,
            Algorithm::L1Sparse,
            Algorithm::RetrainOracle,
        ] {
            assert_eq!(Algorithm::parse(alg.name()).unwrap(), alg);
        }
        assert!(Algorithm::parse("definitely_not_an_algorithm").is_err());
    }
}

