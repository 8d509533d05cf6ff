//! Class-conditional Gaussian generator.
//!
//! The default desk-scale source: class means are drawn once from the spec
//! seed, then train and test splits sample around the same means with
//! independent noise streams, so the whole pipeline runs without downloads.
//!
//! Two mean structures are supported. `iso` places class means anywhere in
//! feature space; `bumps` treats the feature vector as a square image and
//! gives each class one localized patch pattern, which is what makes small
//! convolutional stacks behave like they do on real images. Optional label
//! noise flips a fraction of train labels, planting examples the network can
//! only fit by memorizing them.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::train::mix_seed;

/// How class means are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanStructure {
    /// Independent Gaussian draws per feature.
    #[default]
    Iso,
    /// Localized patch patterns on a square image grid; requires `dim` to be
    /// a perfect square of side at least [`BUMP_PATCH`].
    Bumps,
}

/// Side of the localized patch each class receives under
/// [`MeanStructure::Bumps`].
pub const BUMP_PATCH: usize = 3;

/// Parameters of the synthetic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_n: usize,
    pub test_n: usize,
    /// Standard deviation of the class-mean placement distribution.
    pub mean_scale: f64,
    /// Standard deviation of the per-sample isotropic noise.
    pub noise: f64,
    /// Mean placement structure.
    #[serde(default)]
    pub structure: MeanStructure,
    /// Fraction of train labels flipped to a different class (test labels
    /// stay clean). Flipped examples can only be fit by memorization.
    #[serde(default)]
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 1 || self.dim == 0 || self.train_n == 0 || self.test_n == 0 {
            return Err(Error::Config(
                "synthetic spec needs classes/dim/train_n/test_n >= 1".into(),
            ));
        }
        if self.mean_scale <= 0.0 || self.noise <= 0.0 {
            return Err(Error::Config(
                "synthetic spec needs positive mean_scale and noise".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must be in [0, 1), got {}",
                self.label_noise
            )));
        }
        if self.structure == MeanStructure::Bumps {
            let side = (self.dim as f64).sqrt() as usize;
            if side * side != self.dim || side < BUMP_PATCH {
                return Err(Error::Config(format!(
                    "bumps structure needs dim to be a square of side >= {BUMP_PATCH}, got {}",
                    self.dim
                )));
            }
        }
        Ok(())
    }

    /// Generate the (train, test) pair. Pure function of the spec.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let means = self.class_means();
        let mut train = self.sample_split("train", self.train_n, &means, 1)?;
        if self.label_noise > 0.0 {
            train = self.flip_labels(train)?;
        }
        let test = self.sample_split("test", self.test_n, &means, 2)?;
        Ok((train, test))
    }

    fn class_means(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, 0));
        let normal = Normal::new(0.0, self.mean_scale).unwrap();
        match self.structure {
            MeanStructure::Iso => (0..self.classes)
                .map(|_| (0..self.dim).map(|_| normal.sample(&mut rng)).collect())
                .collect(),
            MeanStructure::Bumps => {
                let side = (self.dim as f64).sqrt() as usize;
                let slots = side - BUMP_PATCH + 1;
                (0..self.classes)
                    .map(|_| {
                        let r0 = rng.random_range(0..slots);
                        let c0 = rng.random_range(0..slots);
                        let mut mean = vec![0.0f64; self.dim];
                        for dr in 0..BUMP_PATCH {
                            for dc in 0..BUMP_PATCH {
                                mean[(r0 + dr) * side + (c0 + dc)] = normal.sample(&mut rng);
                            }
                        }
                        mean
                    })
                    .collect()
            }
        }
    }

    fn sample_split(
        &self,
        name: &str,
        n: usize,
        means: &[Vec<f64>],
        tag: u64,
    ) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, tag));
        let normal = Normal::new(0.0, self.noise).unwrap();
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % self.classes; // balanced round-robin
            let mean = &means[class];
            for &m in mean.iter() {
                features.push((m + normal.sample(&mut rng)) as f32);
            }
            labels.push(class as u32);
        }
        Dataset::new(
            format!("synthetic-{name}"),
            features,
            labels,
            self.dim,
            self.classes,
        )
    }

    fn flip_labels(&self, mut train: Dataset) -> Result<Dataset> {
        if self.classes < 2 {
            return Err(Error::Config(
                "label_noise needs at least 2 classes".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, 3));
        let n = train.labels.len();
        let flips = (self.label_noise * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        // partial Fisher-Yates: the first `flips` entries are the victims
        for i in 0..flips {
            let j = i + rng.random_range(0..(n - i));
            order.swap(i, j);
        }
        for &i in &order[..flips] {
            let old = train.labels[i];
            let draw = rng.random_range(0..self.classes as u32 - 1);
            train.labels[i] = if draw >= old { draw + 1 } else { draw };
        }
        Dataset::new(
            train.name,
            train.features,
            train.labels,
            train.feature_len,
            train.num_classes,
        )
    }
}
