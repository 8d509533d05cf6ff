//! Forget/retain splits and the MIA calibration subset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, DatasetView};
use crate::error::{Error, Result};
use crate::nn::train::mix_seed;

/// How the forget set is drawn from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgetSpec {
    pub kind: ForgetKind,
    /// Target |S| as a fraction of the training set, in (0, 1).
    pub fraction: f64,
    /// Classes the forget set is drawn from (non-IID only).
    #[serde(default)]
    pub classes: Vec<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgetKind {
    /// Uniform sample over the whole training set.
    Iid,
    /// Sample concentrated in the listed classes, split evenly across them.
    NonIid,
}

impl ForgetSpec {
    pub fn validate(&self, num_classes: usize, n: usize) -> Result<()> {
        if !(0.0 < self.fraction && self.fraction < 1.0) {
            return Err(Error::Config(format!(
                "forget fraction must be in (0, 1), got {}",
                self.fraction
            )));
        }
        if (self.fraction * n as f64).round() < 1.0 {
            return Err(Error::Config(format!(
                "forget fraction {} of {n} examples rounds to an empty set",
                self.fraction
            )));
        }
        match self.kind {
            ForgetKind::Iid => Ok(()),
            ForgetKind::NonIid => {
                if self.classes.is_empty() {
                    return Err(Error::Config("non_iid forget spec needs a class list".into()));
                }
                if let Some(&bad) = self.classes.iter().find(|&&c| c as usize >= num_classes) {
                    return Err(Error::Config(format!(
                        "forget class {bad} out of range for {num_classes} classes"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Partition of the training indices into forget set S and retain set.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub forget_indices: Vec<usize>,
    pub retain_indices: Vec<usize>,
}

impl SplitSet {
    pub fn forget_view<'a>(&self, dataset: &'a Dataset) -> DatasetView<'a> {
        dataset.subset(self.forget_indices.clone())
    }

    pub fn retain_view<'a>(&self, dataset: &'a Dataset) -> DatasetView<'a> {
        dataset.subset(self.retain_indices.clone())
    }
}

/// Draw the forget/retain partition for `dataset` according to `spec`.
pub fn make_split(dataset: &Dataset, spec: &ForgetSpec) -> Result<SplitSet> {
    spec.validate(dataset.num_classes, dataset.len())?;
    let n = dataset.len();
    let target = (spec.fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x5711));
    let mut forget: Vec<usize> = match spec.kind {
        ForgetKind::Iid => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all.truncate(target);
            all
        }
        ForgetKind::NonIid => {
            // per-class pools in listed-class order
            let mut pools: Vec<Vec<usize>> = spec
                .classes
                .iter()
                .map(|&c| {
                    (0..n)
                        .filter(|&i| dataset.labels[i] == c)
                        .collect::<Vec<usize>>()
                })
                .collect();
            let capacity: usize = pools.iter().map(Vec::len).sum();
            if capacity < target {
                return Err(Error::Validation(format!(
                    "non_iid forget set needs {target} examples but classes {:?} only hold {capacity} (short by {})",
                    spec.classes,
                    target - capacity
                )));
            }
            for pool in &mut pools {
                pool.shuffle(&mut rng);
            }
            // even allocation, then round-robin redistribution of remainders
            let k = pools.len();
            let mut quota: Vec<usize> = pools
                .iter()
                .enumerate()
                .map(|(i, pool)| (target / k + usize::from(i < target % k)).min(pool.len()))
                .collect();
            let mut assigned: usize = quota.iter().sum();
            while assigned < target {
                let mut grew = false;
                for (q, pool) in quota.iter_mut().zip(&pools) {
                    if assigned == target {
                        break;
                    }
                    if *q < pool.len() {
                        *q += 1;
                        assigned += 1;
                        grew = true;
                    }
                }
                debug_assert!(grew, "capacity check guarantees progress");
            }
            pools
                .iter()
                .zip(&quota)
                .flat_map(|(pool, &q)| pool[..q].iter().copied())
                .collect()
        }
    };
    forget.sort_unstable();
    let in_forget: Vec<bool> = {
        let mut flags = vec![false; n];
        for &i in &forget {
            flags[i] = true;
        }
        flags
    };
    let retain: Vec<usize> = (0..n).filter(|&i| !in_forget[i]).collect();
    Ok(SplitSet {
        forget_indices: forget,
        retain_indices: retain,
    })
}

/// Result of calibration-subset construction; `warnings` records classes
/// whose quota could not be met from the retain set.
#[derive(Debug, Clone)]
pub struct CalibrationSubset {
    /// Underlying dataset indices, |subset| = |test|.
    pub indices: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Pick a retain subset with the same size and per-class counts as the test
/// set. Per-class quotas are clamped to availability; any remainder is filled
/// uniformly from the unused retain examples.
pub fn mia_calibration_subset(
    retain: &DatasetView<'_>,
    test: &Dataset,
    seed: u64,
) -> Result<CalibrationSubset> {
    if retain.len() < test.len() {
        return Err(Error::Validation(format!(
            "retain set ({}) is smaller than the test set ({})",
            retain.len(),
            test.len()
        )));
    }
    let num_classes = test.num_classes;
    let test_hist = test.class_histogram();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xca11));

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for &i in retain.indices() {
        pools[retain.dataset().labels[i] as usize].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }

    let mut warnings = Vec::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(test.len());
    let mut leftovers: Vec<usize> = Vec::new();
    for (class, pool) in pools.iter().enumerate() {
        let want = test_hist[class];
        let take = want.min(pool.len());
        if take < want {
            warnings.push(format!(
                "class {class}: wanted {want} calibration examples, retain only has {take}"
            ));
        }
        chosen.extend_from_slice(&pool[..take]);
        leftovers.extend_from_slice(&pool[take..]);
    }
    let missing = test.len() - chosen.len();
    if missing > 0 {
        leftovers.shuffle(&mut rng);
        chosen.extend_from_slice(&leftovers[..missing]);
    }
    chosen.sort_unstable();
    Ok(CalibrationSubset {
        indices: chosen,
        warnings,
    })
}
