//! Stage execution shared by the CLI commands: data preparation, original
//! training, mask construction, cell runs, evaluation, and a small
//! worker pool for independent (cell, seed) tasks.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, load_idx, make_split, mia_calibration_subset, Dataset, ForgetSpec, SplitSet,
};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, mia_score, FeatureKind, MetricsReport, MIAResult};
use crate::harness::config::{DatasetConfig, Experiment, StrategyConfig, StrategyKind};
use crate::harness::hash::Fnv64;
use crate::harness::layout::write_atomic;
use crate::localization::{
    build_mask_for_model, criticality_scores, critmem_mask, default_max_channels, layer_mask,
    random_matched_mask, top_k_param_mask, Mask, MatchGranularity,
};
use crate::nn::train::mix_seed;
use crate::nn::{run_sgd, LossSpec, Model, TrainLoopConfig, TrainResult};

/// The experiment's train and test datasets, loaded once and shared
/// read-only across all runs.
#[derive(Debug)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn prepare_data(exp: &Experiment) -> Result<ExperimentData> {
    let (train, test) = match &exp.dataset {
        DatasetConfig::Synthetic(spec) => spec.generate()?,
        DatasetConfig::Idx {
            train_features,
            train_labels,
            test_features,
            test_labels,
            num_classes,
        } => (
            load_idx(train_features, train_labels, *num_classes)?,
            load_idx(test_features, test_labels, *num_classes)?,
        ),
        DatasetConfig::Csv {
            train_path,
            test_path,
            num_classes,
        } => (
            load_csv(train_path, *num_classes)?,
            load_csv(test_path, *num_classes)?,
        ),
    };
    if train.feature_len != exp.arch.input.numel() {
        return Err(Error::Dimension(format!(
            "dataset features have length {}, architecture input needs {}",
            train.feature_len,
            exp.arch.input.numel()
        )));
    }
    if train.num_classes != exp.arch.num_classes() {
        return Err(Error::Dimension(format!(
            "dataset has {} classes, architecture outputs {}",
            train.num_classes,
            exp.arch.num_classes()
        )));
    }
    Ok(ExperimentData { train, test })
}

/// Forget/retain split for one run seed.
pub fn split_for_seed(exp: &Experiment, train: &Dataset, seed: u64) -> Result<SplitSet> {
    make_split(
        train,
        &ForgetSpec {
            kind: exp.forget_kind,
            fraction: exp.forget_fraction,
            classes: exp.forget_classes.clone(),
            seed,
        },
    )
}

/// Train the original model on the full training set.
pub fn train_original(
    exp: &Experiment,
    train: &Dataset,
    seed: u64,
) -> Result<(Model, TrainResult)> {
    let mut model = Model::init(exp.arch.clone(), seed)?;
    let mask = vec![true; model.param_count()];
    let result = run_sgd(
        &mut model,
        &train.view(),
        &mask,
        &TrainLoopConfig {
            epochs: exp.train.epochs,
            batch_size: exp.train.batch_size,
            momentum: exp.train.momentum,
            weight_decay: exp.train.weight_decay,
            schedule: exp.train.schedule,
            loss: LossSpec::cross_entropy(),
            negate: false,
            seed,
        },
    )?;
    Ok((model, result))
}

/// Build the mask for one (strategy, alpha) on one seed's original model.
/// Random-matched strategies recursively build their reference mask.
pub fn build_strategy_mask(
    exp: &Experiment,
    strategy: &StrategyConfig,
    alpha: Option<f64>,
    model: &Model,
    data: &ExperimentData,
    split: &SplitSet,
    seed: u64,
) -> Result<Mask> {
    match &strategy.kind {
        StrategyKind::OneShot {
            criterion,
            granularity,
        } => {
            let alpha = alpha.ok_or_else(|| {
                Error::Config(format!("strategy '{}' needs an alpha", strategy.id))
            })?;
            let view = if criterion.uses_forget_set() {
                split.forget_view(&data.train)
            } else {
                data.train.view()
            };
            let scores =
                criticality_scores(model, &view, *criterion, strategy.h, exp.score_batch_size)?;
            match granularity {
                MatchGranularity::Channel => {
                    build_mask_for_model(&scores, model, alpha, strategy.id.clone())
                }
                MatchGranularity::Parameter => {
                    top_k_param_mask(&scores.param_scores, alpha, strategy.id.clone())
                }
            }
        }
        StrategyKind::Layer { k, end } => {
            let mut mask = layer_mask(model, *k, *end)?;
            mask.strategy_tag = strategy.id.clone();
            Ok(mask)
        }
        StrategyKind::CritMem {
            max_channels_per_example,
        } => {
            let bound = max_channels_per_example.unwrap_or_else(|| default_max_channels(model));
            let outcome = critmem_mask(model, &split.forget_view(&data.train), bound)?;
            let mut mask = outcome.mask;
            mask.strategy_tag = strategy.id.clone();
            Ok(mask)
        }
        StrategyKind::RandomMatched {
            reference,
            granularity,
        } => {
            let ref_strategy = exp
                .strategies
                .iter()
                .find(|s| &s.id == reference)
                .ok_or_else(|| {
                    Error::Config(format!("random_matched reference '{reference}' not found"))
                })?;
            if matches!(ref_strategy.kind, StrategyKind::RandomMatched { .. }) {
                return Err(Error::Config(
                    "random_matched cannot reference another random_matched strategy".into(),
                ));
            }
            let reference_mask =
                build_strategy_mask(exp, ref_strategy, alpha, model, data, split, seed)?;
            let mut tag_hash = Fnv64::new();
            tag_hash.write(strategy.id.as_bytes());
            random_matched_mask(
                &reference_mask,
                model,
                *granularity,
                mix_seed(seed, tag_hash.finish()),
            )
        }
    }
}

/// Alphas a strategy expands to in the run matrix; random-matched strategies
/// inherit their reference's budgets, layer/critmem strategies are
/// unbudgeted (label "auto").
pub fn strategy_alphas(exp: &Experiment, strategy: &StrategyConfig) -> Vec<Option<f64>> {
    match &strategy.kind {
        StrategyKind::OneShot { .. } => strategy.alphas.iter().copied().map(Some).collect(),
        StrategyKind::Layer { .. } | StrategyKind::CritMem { .. } => vec![None],
        StrategyKind::RandomMatched { reference, .. } => exp
            .strategies
            .iter()
            .find(|s| &s.id == reference)
            .map(|r| strategy_alphas(exp, r))
            .unwrap_or_else(|| vec![None]),
    }
}

/// Full metrics for one model against one seed's split.
pub fn evaluate_model(
    model: &Model,
    data: &ExperimentData,
    split: &SplitSet,
    seed: u64,
    run_id: &str,
) -> Result<MetricsReport> {
    let forget = split.forget_view(&data.train);
    let retain = split.retain_view(&data.train);
    let test = data.test.view();
    let forget_acc = accuracy(model, &forget)?;
    let retain_acc = accuracy(model, &retain)?;
    let test_acc = accuracy(model, &test)?;
    let calib = mia_calibration_subset(&retain, &data.test, mix_seed(seed, 0xca11b))?;
    let calib_seen = data.train.subset(calib.indices);
    let mia_correctness = mia_score(model, &calib_seen, &test, &forget, FeatureKind::Correctness)?;
    let mia_confidence = mia_score(model, &calib_seen, &test, &forget, FeatureKind::Confidence)?;
    Ok(MetricsReport {
        run_id: run_id.to_string(),
        seed,
        forget_acc,
        retain_acc,
        test_acc,
        mia_correctness,
        mia_confidence,
    })
}

/// Serializable form of a metrics report. Metric files contain only
/// deterministic values so reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub run_id: String,
    pub seed: u64,
    pub forget_acc: f64,
    pub retain_acc: f64,
    pub test_acc: f64,
    pub mia_correctness: MiaFile,
    pub mia_confidence: MiaFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiaFile {
    pub tn: usize,
    pub forget_size: usize,
    pub score: f64,
    pub attacker_train_acc: f64,
}

fn mia_to_file(m: &MIAResult) -> MiaFile {
    MiaFile {
        tn: m.tn,
        forget_size: m.forget_size,
        score: m.score,
        attacker_train_acc: m.attacker_train_acc,
    }
}

fn mia_from_file(m: &MiaFile, kind: FeatureKind) -> MIAResult {
    MIAResult {
        feature_kind: kind,
        tn: m.tn,
        forget_size: m.forget_size,
        score: m.score,
        attacker_train_acc: m.attacker_train_acc,
    }
}

impl MetricsFile {
    pub fn from_report(r: &MetricsReport) -> MetricsFile {
        MetricsFile {
            run_id: r.run_id.clone(),
            seed: r.seed,
            forget_acc: r.forget_acc,
            retain_acc: r.retain_acc,
            test_acc: r.test_acc,
            mia_correctness: mia_to_file(&r.mia_correctness),
            mia_confidence: mia_to_file(&r.mia_confidence),
        }
    }

    pub fn to_report(&self) -> MetricsReport {
        MetricsReport {
            run_id: self.run_id.clone(),
            seed: self.seed,
            forget_acc: self.forget_acc,
            retain_acc: self.retain_acc,
            test_acc: self.test_acc,
            mia_correctness: mia_from_file(&self.mia_correctness, FeatureKind::Correctness),
            mia_confidence: mia_from_file(&self.mia_confidence, FeatureKind::Confidence),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Config(format!("metrics serialization failed: {e}")))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<MetricsFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            offset: 0,
            message: e.to_string(),
        })
    }
}

/// Run `f` over `items` on up to `workers` threads. Results come back in
/// item order; the first error wins. Each item's work must be independent.
pub fn run_over<I, T, F>(items: Vec<I>, workers: usize, f: F) -> Result<Vec<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> Result<T> + Sync,
{
    let n = items.len();
    if workers <= 1 || n <= 1 {
        return items.into_iter().map(f).collect();
    }
    let slots: Vec<Mutex<Option<I>>> = items.into_iter().map(|i| Mutex::new(Some(i))).collect();
    let results: Vec<Mutex<Option<Result<T>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let item = slots[i].lock().unwrap().take().expect("each slot taken once");
                let out = f(item);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// Per-seed mask cache so one (strategy, alpha) mask is shared by every
/// algorithm in the grid.
pub struct MaskCache<'a> {
    exp: &'a Experiment,
    model: &'a Model,
    data: &'a ExperimentData,
    split: &'a SplitSet,
    seed: u64,
    cache: HashMap<(String, String), Mask>,
}

impl<'a> MaskCache<'a> {
    pub fn new(
        exp: &'a Experiment,
        model: &'a Model,
        data: &'a ExperimentData,
        split: &'a SplitSet,
        seed: u64,
    ) -> MaskCache<'a> {
        MaskCache {
            exp,
            model,
            data,
            split,
            seed,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, strategy: &StrategyConfig, alpha: Option<f64>) -> Result<Mask> {
        let key = (
            strategy.id.clone(),
            crate::harness::layout::alpha_label(alpha),
        );
        if let Some(m) = self.cache.get(&key) {
            return Ok(m.clone());
        }
        let mask = build_strategy_mask(
            self.exp, strategy, alpha, self.model, self.data, self.split, self.seed,
        )?;
        self.cache.insert(key, mask.clone());
        Ok(mask)
    }
}
