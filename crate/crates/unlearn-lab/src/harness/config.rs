//! Experiment configuration: strict TOML schema with a schema-version field.
//! Unknown keys are errors, not warnings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ForgetKind, MeanStructure, SyntheticSpec};
use crate::error::{Error, Result};
use crate::localization::{Criterion, LayerEnd, MatchGranularity};
use crate::nn::{ArchSpec, Schedule, ScheduleKind};
use crate::unlearning::{Algorithm, TrainRecipe};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "UNLEARN_LAB_OUT";

pub const SCHEMA_VERSION: u32 = 1;

/// Raw TOML schema. Field names are the config-file surface; everything is
/// validated into [`Experiment`] before use.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    /// Held-out seed used only for per-cell learning-rate selection.
    #[serde(default)]
    pub validation_seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub dataset: DatasetToml,
    pub model: ModelToml,
    pub train: TrainToml,
    pub forget: ForgetToml,
    #[serde(default)]
    pub localization: LocalizationToml,
    #[serde(rename = "strategy")]
    pub strategies: Vec<StrategyToml>,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmToml>,
    #[serde(default)]
    pub oracle: OracleToml,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetToml {
    pub kind: String,
    // synthetic
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub train_n: Option<usize>,
    #[serde(default)]
    pub test_n: Option<usize>,
    #[serde(default)]
    pub mean_scale: Option<f64>,
    #[serde(default)]
    pub noise: Option<f64>,
    /// "iso" or "bumps" (localized patch class means on a square image).
    #[serde(default)]
    pub structure: Option<String>,
    /// Fraction of train labels flipped to another class.
    #[serde(default)]
    pub label_noise: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    // idx / csv
    #[serde(default)]
    pub train_features: Option<String>,
    #[serde(default)]
    pub train_labels: Option<String>,
    #[serde(default)]
    pub test_features: Option<String>,
    #[serde(default)]
    pub test_labels: Option<String>,
    #[serde(default)]
    pub train_path: Option<String>,
    #[serde(default)]
    pub test_path: Option<String>,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelToml {
    pub arch: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainToml {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    #[serde(default = "default_eta_min_frac")]
    pub eta_min_frac: f64,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_schedule() -> String {
    "cosine".into()
}
fn default_eta_min_frac() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgetToml {
    pub kind: String,
    pub fraction: f64,
    #[serde(default)]
    pub classes: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationToml {
    /// Top-h aggregation size for neuron criticality.
    #[serde(default = "default_h")]
    pub h: usize,
    /// Mini-batch size for score accumulation; defaults to the training
    /// batch size.
    #[serde(default)]
    pub score_batch_size: Option<usize>,
}

fn default_h() -> usize {
    10
}

impl Default for LocalizationToml {
    fn default() -> Self {
        LocalizationToml {
            h: default_h(),
            score_batch_size: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyToml {
    pub name: String,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default)]
    pub criterion: Option<String>,
    #[serde(default)]
    pub granularity: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub max_channels_per_example: Option<usize>,
    #[serde(default)]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmToml {
    pub name: String,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default)]
    pub lr_candidates: Option<Vec<f64>>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub momentum: Option<f64>,
    #[serde(default)]
    pub weight_decay: Option<f64>,
    #[serde(default)]
    pub l1_lambda: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default)]
    pub eta_min_frac: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleToml {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub lr: Option<f64>,
}

/// Where the data comes from, resolved.
#[derive(Debug, Clone)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    Idx {
        train_features: PathBuf,
        train_labels: PathBuf,
        test_features: PathBuf,
        test_labels: PathBuf,
        num_classes: usize,
    },
    Csv {
        train_path: PathBuf,
        test_path: PathBuf,
        num_classes: usize,
    },
}

/// One localization strategy, resolved.
#[derive(Debug, Clone)]
pub struct StrategyConfig {
    /// Unique id; names the output directory level.
    pub id: String,
    pub kind: StrategyKind,
    /// Budgets to evaluate; empty for strategies whose selection size is
    /// derived (layer masks, iterative channel search).
    pub alphas: Vec<f64>,
    pub h: usize,
}

#[derive(Debug, Clone)]
pub enum StrategyKind {
    /// One-shot scoring with a criterion and granularity.
    OneShot {
        criterion: Criterion,
        granularity: MatchGranularity,
    },
    Layer {
        k: usize,
        end: LayerEnd,
    },
    CritMem {
        max_channels_per_example: Option<usize>,
    },
    RandomMatched {
        reference: String,
        granularity: MatchGranularity,
    },
}

/// One unlearning algorithm cell, resolved with defaults filled in.
#[derive(Debug, Clone)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub lr: f64,
    pub lr_candidates: Vec<f64>,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub l1_lambda: f64,
    pub beta: f64,
    pub schedule_kind: ScheduleKind,
    pub eta_min_frac: f64,
}

impl AlgorithmConfig {
    /// Build the run config for one cell.
    pub fn unlearn_config(&self, lr: f64, seed: u64) -> crate::unlearning::UnlearnConfig {
        crate::unlearning::UnlearnConfig {
            algorithm: self.algorithm,
            epochs: self.epochs,
            schedule: Schedule {
                kind: self.schedule_kind,
                lr_init: lr,
                eta_min_frac: self.eta_min_frac,
                total_steps: 1,
            },
            batch_size: self.batch_size,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            l1_lambda: self.l1_lambda,
            beta: self.beta,
            seed,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seeds: Vec<u64>,
    pub validation_seed: u64,
    pub output_root: PathBuf,
    pub dataset: DatasetConfig,
    pub arch: ArchSpec,
    pub train: TrainRecipe,
    pub forget_kind: ForgetKind,
    pub forget_fraction: f64,
    pub forget_classes: Vec<u32>,
    pub strategies: Vec<StrategyConfig>,
    pub algorithms: Vec<AlgorithmConfig>,
    pub oracle_recipe: TrainRecipe,
    pub h: usize,
    pub score_batch_size: usize,
    /// Hash of the raw config text plus overrides; names the output tree.
    pub config_hash: String,
}

fn parse_schedule_kind(name: &str) -> Result<ScheduleKind> {
    match name {
        "cosine" => Ok(ScheduleKind::Cosine),
        "constant" => Ok(ScheduleKind::Constant),
        other => Err(Error::Config(format!("unknown schedule kind '{other}'"))),
    }
}

fn parse_criterion(name: &str) -> Result<Criterion> {
    Ok(match name {
        "grad_forget" => Criterion::GradForget,
        "weights_only" => Criterion::WeightsOnly,
        "weighted_grad_train" => Criterion::WeightedGradTrain,
        "weighted_grad_forget" => Criterion::WeightedGradForget,
        other => return Err(Error::Config(format!("unknown criterion '{other}'"))),
    })
}

fn parse_granularity(name: &str) -> Result<MatchGranularity> {
    Ok(match name {
        "channel" => MatchGranularity::Channel,
        "parameter" => MatchGranularity::Parameter,
        other => return Err(Error::Config(format!("unknown granularity '{other}'"))),
    })
}

fn resolve_strategy(raw: &StrategyToml, default_h: usize) -> Result<StrategyConfig> {
    let h = raw.h.unwrap_or(default_h);
    let alphas = raw.alphas.clone().unwrap_or_default();
    let budgeted = |alphas: &[f64]| -> Result<()> {
        if alphas.is_empty() {
            return Err(Error::Config(format!(
                "strategy '{}' needs a non-empty alphas list",
                raw.name
            )));
        }
        if let Some(&bad) = alphas.iter().find(|&&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Config(format!(
                "strategy '{}' alpha {bad} outside [0, 1]",
                raw.name
            )));
        }
        Ok(())
    };
    let (kind, default_id, alphas) = match raw.name.as_str() {
        // the headline channel-granular weighted-gradient strategy
        "del" => {
            budgeted(&alphas)?;
            (
                StrategyKind::OneShot {
                    criterion: Criterion::WeightedGradForget,
                    granularity: MatchGranularity::Channel,
                },
                "del".to_string(),
                alphas,
            )
        }
        // gradient-magnitude top-k over individual parameters
        "salloc" => {
            budgeted(&alphas)?;
            (
                StrategyKind::OneShot {
                    criterion: Criterion::GradForget,
                    granularity: MatchGranularity::Parameter,
                },
                "salloc".to_string(),
                alphas,
            )
        }
        "one_shot" => {
            budgeted(&alphas)?;
            let criterion = parse_criterion(raw.criterion.as_deref().ok_or_else(|| {
                Error::Config("one_shot strategy needs a 'criterion'".into())
            })?)?;
            let granularity = parse_granularity(raw.granularity.as_deref().ok_or_else(|| {
                Error::Config("one_shot strategy needs a 'granularity'".into())
            })?)?;
            let gran_name = match granularity {
                MatchGranularity::Channel => "channel",
                MatchGranularity::Parameter => "parameter",
            };
            (
                StrategyKind::OneShot {
                    criterion,
                    granularity,
                },
                format!("{}_{}", criterion.name(), gran_name),
                alphas,
            )
        }
        "deepest" | "shallowest" => {
            let k = raw
                .k
                .ok_or_else(|| Error::Config(format!("strategy '{}' needs 'k'", raw.name)))?;
            let end = if raw.name == "deepest" {
                LayerEnd::Deepest
            } else {
                LayerEnd::Shallowest
            };
            (
                StrategyKind::Layer { k, end },
                format!("{}_k{k}", raw.name),
                vec![],
            )
        }
        "critmem" => (
            StrategyKind::CritMem {
                max_channels_per_example: raw.max_channels_per_example,
            },
            "critmem".to_string(),
            vec![],
        ),
        "random_matched" => {
            let reference = raw.reference.clone().ok_or_else(|| {
                Error::Config("random_matched strategy needs a 'reference' id".into())
            })?;
            let granularity = parse_granularity(raw.granularity.as_deref().ok_or_else(|| {
                Error::Config("random_matched strategy needs a 'granularity'".into())
            })?)?;
            let gran_name = match granularity {
                MatchGranularity::Channel => "channel",
                MatchGranularity::Parameter => "parameter",
            };
            (
                StrategyKind::RandomMatched {
                    reference: reference.clone(),
                    granularity,
                },
                format!("random_{reference}_{gran_name}"),
                vec![],
            )
        }
        other => return Err(Error::Config(format!("unknown strategy '{other}'"))),
    };
    Ok(StrategyConfig {
        id: raw.id.clone().unwrap_or(default_id),
        kind,
        alphas,
        h,
    })
}

fn resolve_algorithm(raw: &AlgorithmToml, train: &TrainToml) -> Result<AlgorithmConfig> {
    let algorithm = Algorithm::parse(&raw.name)?;
    if algorithm == Algorithm::RetrainOracle {
        return Err(Error::Config(
            "retrain_oracle is always run as the reference; do not list it as an algorithm".into(),
        ));
    }
    let (default_kind, default_frac) = algorithm.default_schedule_kind();
    let schedule_kind = match &raw.schedule {
        Some(s) => parse_schedule_kind(s)?,
        None => default_kind,
    };
    let lr = raw.lr.unwrap_or(train.lr * 0.5);
    let lr_candidates = match &raw.lr_candidates {
        Some(c) if !c.is_empty() => c.clone(),
        _ => vec![lr],
    };
    Ok(AlgorithmConfig {
        algorithm,
        epochs: raw.epochs.unwrap_or_else(|| (train.epochs / 5).max(1)),
        lr,
        lr_candidates,
        batch_size: raw.batch_size.unwrap_or(train.batch_size),
        momentum: raw.momentum.unwrap_or(train.momentum),
        weight_decay: raw.weight_decay.unwrap_or(train.weight_decay),
        l1_lambda: raw
            .l1_lambda
            .unwrap_or(if algorithm == Algorithm::L1Sparse { 1e-4 } else { 0.0 }),
        beta: raw.beta.unwrap_or(0.95),
        schedule_kind,
        eta_min_frac: raw.eta_min_frac.unwrap_or(default_frac),
    })
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<ConfigFile> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            offset: 0,
            message: e.to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Validate and resolve into an [`Experiment`].
    ///
    /// `out_override` (from --out) wins over the config's `output_dir`,
    /// which wins over the `UNLEARN_LAB_OUT` environment variable.
    /// `seed_override` replaces the seeds list and is folded into the
    /// config hash.
    pub fn resolve(
        &self,
        raw_text: &str,
        out_override: Option<&Path>,
        seed_override: Option<u64>,
    ) -> Result<Experiment> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list must not be empty".into()));
        }
        let seeds = match seed_override {
            Some(s) => vec![s],
            None => self.seeds.clone(),
        };
        let validation_seed = self
            .validation_seed
            .unwrap_or_else(|| seeds.iter().max().unwrap() + 1000);
        if seeds.contains(&validation_seed) {
            return Err(Error::Config(format!(
                "validation_seed {validation_seed} must not appear in the seeds list"
            )));
        }

        let dataset = self.resolve_dataset()?;
        let arch = ArchSpec::parse(&self.model.arch)?;

        let schedule = Schedule {
            kind: parse_schedule_kind(&self.train.schedule)?,
            lr_init: self.train.lr,
            eta_min_frac: self.train.eta_min_frac,
            total_steps: 1,
        };
        schedule.validate()?;
        let train = TrainRecipe {
            epochs: self.train.epochs,
            schedule,
            batch_size: self.train.batch_size,
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
        };

        let forget_kind = match self.forget.kind.as_str() {
            "iid" => ForgetKind::Iid,
            "non_iid" => ForgetKind::NonIid,
            other => return Err(Error::Config(format!("unknown forget kind '{other}'"))),
        };

        let strategies: Vec<StrategyConfig> = self
            .strategies
            .iter()
            .map(|s| resolve_strategy(s, self.localization.h))
            .collect::<Result<_>>()?;
        if strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        {
            let mut ids: Vec<&str> = strategies.iter().map(|s| s.id.as_str()).collect();
            ids.sort_unstable();
            for w in ids.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Config(format!(
                        "duplicate strategy id '{}'; set a unique 'id'",
                        w[0]
                    )));
                }
            }
        }
        // random_matched references must resolve to budgeted strategies
        for s in &strategies {
            if let StrategyKind::RandomMatched { reference, .. } = &s.kind {
                if !strategies.iter().any(|o| &o.id == reference) {
                    return Err(Error::Config(format!(
                        "random_matched reference '{reference}' does not name a strategy id"
                    )));
                }
            }
        }

        let algorithms: Vec<AlgorithmConfig> = self
            .algorithms
            .iter()
            .map(|a| resolve_algorithm(a, &self.train))
            .collect::<Result<_>>()?;
        if algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }

        let mut oracle_recipe = train.oracle_defaults();
        if let Some(e) = self.oracle.epochs {
            oracle_recipe.epochs = e;
        }
        if let Some(lr) = self.oracle.lr {
            oracle_recipe.schedule = oracle_recipe.schedule.with_lr(lr);
        }

        let output_root = match out_override {
            Some(p) => p.to_path_buf(),
            None => match &self.output_dir {
                Some(dir) => PathBuf::from(dir),
                None => std::env::var(OUTPUT_ROOT_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|_| PathBuf::from("outputs")),
            },
        };

        let mut hash_input = raw_text.as_bytes().to_vec();
        if let Some(s) = seed_override {
            hash_input.extend_from_slice(format!("\nseed_override={s}").as_bytes());
        }
        let config_hash = crate::harness::hash::content_hash(&hash_input);

        Ok(Experiment {
            seeds,
            validation_seed,
            output_root,
            dataset,
            arch,
            train,
            forget_kind,
            forget_fraction: self.forget.fraction,
            forget_classes: self.forget.classes.clone(),
            strategies,
            algorithms,
            oracle_recipe,
            h: self.localization.h,
            score_batch_size: self
                .localization
                .score_batch_size
                .unwrap_or(self.train.batch_size),
            config_hash,
        })
    }

    fn resolve_dataset(&self) -> Result<DatasetConfig> {
        let d = &self.dataset;
        match d.kind.as_str() {
            "synthetic" => {
                let need = |v: Option<usize>, name: &str| {
                    v.ok_or_else(|| Error::Config(format!("synthetic dataset needs '{name}'")))
                };
                let structure = match d.structure.as_deref() {
                    None | Some("iso") => MeanStructure::Iso,
                    Some("bumps") => MeanStructure::Bumps,
                    Some(other) => {
                        return Err(Error::Config(format!(
                            "unknown synthetic structure '{other}'"
                        )))
                    }
                };
                Ok(DatasetConfig::Synthetic(SyntheticSpec {
                    classes: need(d.classes, "classes")?,
                    dim: need(d.dim, "dim")?,
                    train_n: need(d.train_n, "train_n")?,
                    test_n: need(d.test_n, "test_n")?,
                    mean_scale: d.mean_scale.unwrap_or(1.0),
                    noise: d.noise.unwrap_or(1.0),
                    structure,
                    label_noise: d.label_noise.unwrap_or(0.0),
                    seed: d.seed.unwrap_or(0),
                }))
            }
            "idx" => {
                let need = |v: &Option<String>, name: &str| {
                    v.clone()
                        .map(PathBuf::from)
                        .ok_or_else(|| Error::Config(format!("idx dataset needs '{name}'")))
                };
                Ok(DatasetConfig::Idx {
                    train_features: need(&d.train_features, "train_features")?,
                    train_labels: need(&d.train_labels, "train_labels")?,
                    test_features: need(&d.test_features, "test_features")?,
                    test_labels: need(&d.test_labels, "test_labels")?,
                    num_classes: d
                        .num_classes
                        .ok_or_else(|| Error::Config("idx dataset needs 'num_classes'".into()))?,
                })
            }
            "csv" => Ok(DatasetConfig::Csv {
                train_path: d
                    .train_path
                    .clone()
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config("csv dataset needs 'train_path'".into()))?,
                test_path: d
                    .test_path
                    .clone()
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config("csv dataset needs 'test_path'".into()))?,
                num_classes: d
                    .num_classes
                    .ok_or_else(|| Error::Config("csv dataset needs 'num_classes'".into()))?,
            }),
            other => Err(Error::Config(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Read, parse, and resolve a config file.
pub fn load_experiment(
    path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<Experiment> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = ConfigFile::parse(&text, &path.display().to_string())?;
    cfg.resolve(&text, out_override, seed_override)
}
