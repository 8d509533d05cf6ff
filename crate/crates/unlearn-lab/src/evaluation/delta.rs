//! Delta-vs-oracle reporting with confidence intervals over seeds.
//!
//! Every metric is reported as `100 * (oracle value - unlearned value)` in
//! percentage points; zero on every metric is the ideal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::mia::MIAResult;

/// Per-run metrics for one model on one split.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub run_id: String,
    pub seed: u64,
    pub forget_acc: f64,
    pub retain_acc: f64,
    pub test_acc: f64,
    pub mia_correctness: MIAResult,
    pub mia_confidence: MIAResult,
}

/// Mean and 95% CI half-width of one delta metric over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Half-width of the 95% confidence interval of the mean; `None` for a
    /// single seed.
    pub ci95: Option<f64>,
}

/// Per-metric deltas of one (strategy, algorithm, alpha) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub n: usize,
    pub forget: DeltaStats,
    pub retain: DeltaStats,
    pub test: DeltaStats,
    pub mia_correctness: DeltaStats,
    pub mia_confidence: DeltaStats,
}

impl DeltaReport {
    pub fn metrics(&self) -> [(&'static str, &DeltaStats); 5] {
        [
            ("delta_forget", &self.forget),
            ("delta_retain", &self.retain),
            ("delta_test", &self.test),
            ("delta_mia_correctness", &self.mia_correctness),
            ("delta_mia_confidence", &self.mia_confidence),
        ]
    }
}

/// Two-tailed 95% Student-t critical values by degrees of freedom; the
/// normal value 1.96 is used from 30 seeds up.
pub fn t_critical_95(n: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    assert!(n >= 2, "CI needs at least two samples");
    if n >= 30 {
        1.96
    } else {
        TABLE[n - 2]
    }
}

/// Mean and 95% CI half-width of a sample.
pub fn mean_ci95(values: &[f64]) -> DeltaStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci95 = if n >= 2 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Some(t_critical_95(n) * var.sqrt() / (n as f64).sqrt())
    } else {
        None
    };
    DeltaStats {
        per_seed: values.to_vec(),
        mean,
        ci95,
    }
}

/// Pair oracle and unlearned reports by seed and compute all delta metrics.
pub fn delta_report(oracle: &[MetricsReport], unlearned: &[MetricsReport]) -> Result<DeltaReport> {
    if oracle.is_empty() || unlearned.is_empty() {
        return Err(Error::Empty("delta report needs at least one paired run".into()));
    }
    if oracle.len() != unlearned.len() {
        return Err(Error::Validation(format!(
            "{} oracle runs cannot pair with {} unlearned runs",
            oracle.len(),
            unlearned.len()
        )));
    }
    let mut oracle_sorted: Vec<&MetricsReport> = oracle.iter().collect();
    let mut unlearned_sorted: Vec<&MetricsReport> = unlearned.iter().collect();
    oracle_sorted.sort_by_key(|r| r.seed);
    unlearned_sorted.sort_by_key(|r| r.seed);

    let mut forget = Vec::new();
    let mut retain = Vec::new();
    let mut test = Vec::new();
    let mut mia_cor = Vec::new();
    let mut mia_con = Vec::new();
    for (o, u) in oracle_sorted.iter().zip(&unlearned_sorted) {
        if o.seed != u.seed {
            return Err(Error::Validation(format!(
                "unpaired seeds: oracle {} vs unlearned {}",
                o.seed, u.seed
            )));
        }
        forget.push(100.0 * (o.forget_acc - u.forget_acc));
        retain.push(100.0 * (o.retain_acc - u.retain_acc));
        test.push(100.0 * (o.test_acc - u.test_acc));
        mia_cor.push(100.0 * (o.mia_correctness.score - u.mia_correctness.score));
        mia_con.push(100.0 * (o.mia_confidence.score - u.mia_confidence.score));
    }
    Ok(DeltaReport {
        n: oracle.len(),
        forget: mean_ci95(&forget),
        retain: mean_ci95(&retain),
        test: mean_ci95(&test),
        mia_correctness: mean_ci95(&mia_cor),
        mia_confidence: mean_ci95(&mia_con),
    })
}
