//! Learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant or cosine-annealed learning rate over a fixed step horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub lr_init: f64,
    /// Final learning rate as a fraction of `lr_init` (cosine only).
    pub eta_min_frac: f64,
    pub total_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Cosine,
}

impl Schedule {
    pub fn constant(lr_init: f64) -> Schedule {
        Schedule {
            kind: ScheduleKind::Constant,
            lr_init,
            eta_min_frac: 1.0,
            total_steps: 1,
        }
    }

    pub fn cosine(lr_init: f64, eta_min_frac: f64, total_steps: usize) -> Schedule {
        Schedule {
            kind: ScheduleKind::Cosine,
            lr_init,
            eta_min_frac,
            total_steps,
        }
    }

    /// Same schedule stretched over a different horizon.
    pub fn with_total_steps(mut self, total_steps: usize) -> Schedule {
        self.total_steps = total_steps;
        self
    }

    /// Same schedule with a different peak learning rate.
    pub fn with_lr(mut self, lr_init: f64) -> Schedule {
        self.lr_init = lr_init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr_init <= 0.0 {
            return Err(Error::Config(format!(
                "lr_init must be > 0, got {}",
                self.lr_init
            )));
        }
        if !(0.0..=1.0).contains(&self.eta_min_frac) {
            return Err(Error::Config(format!(
                "eta_min_frac must be in [0, 1], got {}",
                self.eta_min_frac
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Learning rate at `step`. Steps past the horizon clamp to the floor.
pub fn schedule_lr(sched: &Schedule, step: usize) -> f64 {
    match sched.kind {
        ScheduleKind::Constant => sched.lr_init,
        ScheduleKind::Cosine => {
            let eta_min = sched.eta_min_frac * sched.lr_init;
            if step >= sched.total_steps {
                return eta_min;
            }
            let progress = step as f64 / sched.total_steps as f64;
            eta_min
                + (sched.lr_init - eta_min) * (1.0 + (std::f64::consts::PI * progress).cos()) / 2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_starts_at_lr_init() {
        let s = Schedule::cosine(0.1, 0.01, 100);
        assert_eq!(schedule_lr(&s, 0), 0.1);
    }

    #[test]
    fn cosine_ends_at_one_percent_of_lr_init() {
        let s = Schedule::cosine(0.1, 0.01, 100);
        let end = schedule_lr(&s, 100);
        assert!((end - 0.001).abs() < 1e-15, "end = {end}");
    }

    #[test]
    fn cosine_midpoint_is_half_without_floor() {
        let s = Schedule::cosine(1.0, 0.0, 10);
        let mid = schedule_lr(&s, 5);
        assert!((mid - 0.5).abs() < 1e-15, "mid = {mid}");
    }

    #[test]
    fn steps_past_horizon_clamp_to_floor() {
        let s = Schedule::cosine(1.0, 0.25, 10);
        assert_eq!(schedule_lr(&s, 11), 0.25);
        assert_eq!(schedule_lr(&s, 1_000), 0.25);
    }

    #[test]
    fn cosine_is_non_increasing() {
        let s = Schedule::cosine(0.3, 0.01, 57);
        let mut prev = f64::INFINITY;
        for step in 0..=57 {
            let lr = schedule_lr(&s, step);
            assert!(lr <= prev + 1e-15, "increase at step {step}");
            prev = lr;
        }
    }

    #[test]
    fn constant_ignores_step() {
        let s = Schedule::constant(0.05);
        assert_eq!(schedule_lr(&s, 0), 0.05);
        assert_eq!(schedule_lr(&s, 999), 0.05);
    }
}
