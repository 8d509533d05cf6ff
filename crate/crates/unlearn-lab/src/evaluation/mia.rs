//! Membership inference attack score.
//!
//! A binary seen/unseen classifier is trained on features extracted from the
//! evaluated model: calibration retain examples are "seen", test examples
//! "unseen". Applied to the forget set, the score is TN / |S| - the fraction
//! of forget examples the attacker believes were never trained on. Ideal is
//! the retrain oracle's score, not 1.
//!
//! The attacker is a soft-margin linear classifier trained by deterministic
//! full-batch subgradient descent on the hinge loss, so evaluation is
//! reproducible bit for bit. For 1-d confidence features this is validated
//! against an exhaustive threshold-search oracle in the acceptance suite.

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::evaluation::accuracy::EVAL_BATCH;
use crate::nn::{forward, Model};

/// Which model output feeds the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Predicted class index, one-hot encoded (the index carries no order).
    Correctness,
    /// Softmax probability of the predicted class; a 1-d feature.
    Confidence,
}

impl FeatureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Correctness => "correctness",
            FeatureKind::Confidence => "confidence",
        }
    }
}

/// Attack outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MIAResult {
    pub feature_kind: FeatureKind,
    /// Forget examples the attacker classified as unseen.
    pub tn: usize,
    pub forget_size: usize,
    /// tn / forget_size.
    pub score: f64,
    /// Attacker accuracy on its own calibration data; values near 0.5 flag a
    /// degenerate attacker whose score carries little signal.
    pub attacker_train_acc: f64,
}

/// Extract per-example attack features from the model.
pub fn extract_features(
    model: &Model,
    data: &DatasetView<'_>,
    kind: FeatureKind,
) -> Result<Vec<Vec<f64>>> {
    if data.is_empty() {
        return Err(Error::Empty("feature extraction over an empty view".into()));
    }
    let classes = model.num_classes();
    let order: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for batch in data.batches_in_order(&order, EVAL_BATCH.min(data.len())) {
        let logits = forward(model, &batch)?;
        for i in 0..batch.len() {
            let predicted = logits.argmax(i);
            match kind {
                FeatureKind::Correctness => {
                    let mut onehot = vec![0.0; classes];
                    onehot[predicted] = 1.0;
                    out.push(onehot);
                }
                FeatureKind::Confidence => {
                    out.push(vec![logits.softmax(i)[predicted]]);
                }
            }
        }
    }
    Ok(out)
}

/// Soft-margin linear seen/unseen classifier.
#[derive(Debug, Clone)]
pub struct LinearAttacker {
    pub weights: Vec<f64>,
    pub bias: f64,
}

const ATTACKER_EPOCHS: usize = 4000;
const ATTACKER_L2: f64 = 1e-3;

impl LinearAttacker {
    /// Train on (seen -> +1, unseen -> -1) by full-batch subgradient descent
    /// on `l2/2 ||w||^2 + mean hinge`. Fully deterministic: zero init,
    /// 1/sqrt(t) steps, fixed iteration count.
    pub fn train(seen: &[Vec<f64>], unseen: &[Vec<f64>]) -> Result<LinearAttacker> {
        if seen.is_empty() || unseen.is_empty() {
            return Err(Error::Empty("attacker needs seen and unseen calibration data".into()));
        }
        let dim = seen[0].len();
        if seen.iter().chain(unseen).any(|f| f.len() != dim) {
            return Err(Error::Dimension("inconsistent feature dimensions".into()));
        }
        let n = (seen.len() + unseen.len()) as f64;
        let mut w = vec![0.0f64; dim];
        let mut b = 0.0f64;
        for t in 0..ATTACKER_EPOCHS {
            let step = 1.0 / (1.0 + t as f64).sqrt();
            let mut gw = vec![0.0f64; dim];
            let mut gb = 0.0f64;
            let add = |x: &[f64], y: f64, gw: &mut [f64], gb: &mut f64| {
                let margin = y * (dot(&w, x) + b);
                if margin < 1.0 {
                    for (g, &xi) in gw.iter_mut().zip(x) {
                        *g -= y * xi;
                    }
                    *gb -= y;
                }
            };
            for x in seen {
                add(x, 1.0, &mut gw, &mut gb);
            }
            for x in unseen {
                add(x, -1.0, &mut gw, &mut gb);
            }
            for (wi, gi) in w.iter_mut().zip(&gw) {
                *wi -= step * (ATTACKER_L2 * *wi + gi / n);
            }
            b -= step * gb / n;
        }
        Ok(LinearAttacker { weights: w, bias: b })
    }

    /// True when the attacker calls the example "seen". The tie at exactly
    /// zero counts as seen.
    pub fn predicts_seen(&self, features: &[f64]) -> bool {
        dot(&self.weights, features) + self.bias >= 0.0
    }

    /// Accuracy on a labeled feature set.
    pub fn accuracy(&self, seen: &[Vec<f64>], unseen: &[Vec<f64>]) -> f64 {
        let correct = seen.iter().filter(|f| self.predicts_seen(f)).count()
            + unseen.iter().filter(|f| !self.predicts_seen(f)).count();
        correct as f64 / (seen.len() + unseen.len()) as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Count the forget examples an attacker classifies as unseen.
pub fn true_negatives(attacker: &LinearAttacker, forget_features: &[Vec<f64>]) -> usize {
    forget_features
        .iter()
        .filter(|f| !attacker.predicts_seen(f))
        .count()
}

/// Run the full attack against `model`.
///
/// `calib_seen` must be a retain subset matched to the test set (see
/// `data::mia_calibration_subset`); `calib_unseen` is the test set; both are
/// disjoint from `forget`.
pub fn mia_score(
    model: &Model,
    calib_seen: &DatasetView<'_>,
    calib_unseen: &DatasetView<'_>,
    forget: &DatasetView<'_>,
    feature_kind: FeatureKind,
) -> Result<MIAResult> {
    let seen = extract_features(model, calib_seen, feature_kind)?;
    let unseen = extract_features(model, calib_unseen, feature_kind)?;
    let forget_features = extract_features(model, forget, feature_kind)?;
    let attacker = LinearAttacker::train(&seen, &unseen)?;
    let tn = true_negatives(&attacker, &forget_features);
    let forget_size = forget_features.len();
    Ok(MIAResult {
        feature_kind,
        tn,
        forget_size,
        score: tn as f64 / forget_size as f64,
        attacker_train_acc: attacker.accuracy(&seen, &unseen),
    })
}
