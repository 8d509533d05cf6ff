//! Per-parameter and per-neuron criticality scores.
//!
//! The data-dependent criteria accumulate a signed quantity over mini-batches
//! first and take the magnitude once at the end, so contributions of opposite
//! sign across batches cancel. The two-batch cancellation test below pins
//! this order.

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::nn::{loss_and_grads, LossSpec, Model};

/// What raw quantity feeds the criticality score of parameter `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// |accumulated gradient| on the forget set.
    GradForget,
    /// |theta_j|; uses no data pass.
    WeightsOnly,
    /// |accumulated theta_j * g_j| on the full training set.
    WeightedGradTrain,
    /// |accumulated theta_j * g_j| on the forget set.
    WeightedGradForget,
}

impl Criterion {
    pub fn needs_data(&self) -> bool {
        !matches!(self, Criterion::WeightsOnly)
    }

    /// True for the criteria evaluated on the forget set rather than the
    /// training set.
    pub fn uses_forget_set(&self) -> bool {
        matches!(self, Criterion::GradForget | Criterion::WeightedGradForget)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::GradForget => "grad_forget",
            Criterion::WeightsOnly => "weights_only",
            Criterion::WeightedGradTrain => "weighted_grad_train",
            Criterion::WeightedGradForget => "weighted_grad_forget",
        }
    }
}

/// Criticality of one neuron/channel group.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronScore {
    pub layer: usize,
    pub neuron: usize,
    pub score: f64,
    pub param_count: usize,
}

/// Scores for every parameter and every neuron group of a model.
#[derive(Debug, Clone)]
pub struct CriticalityScores {
    pub param_scores: Vec<f64>,
    pub neuron_scores: Vec<NeuronScore>,
    pub h: usize,
    pub criterion: Criterion,
}

/// Mean of the top `min(h, len)` entries of a descending-sorted list.
pub fn neuron_topk_avg(sorted_desc: &[f64], h: usize) -> f64 {
    assert!(!sorted_desc.is_empty(), "neuron group cannot be empty");
    assert!(h >= 1, "h must be >= 1");
    let k = h.min(sorted_desc.len());
    sorted_desc[..k].iter().sum::<f64>() / k as f64
}

/// Accumulate the signed per-parameter quantity over one pass of `data` in
/// mini-batches of `batch_size`, in view order.
fn accumulate_signed(
    model: &Model,
    data: &DatasetView<'_>,
    batch_size: usize,
    weighted: bool,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Empty(
            "criticality criterion needs a non-empty data view".into(),
        ));
    }
    let p = model.param_count();
    let mut acc = vec![0.0f64; p];
    let order: Vec<usize> = (0..data.len()).collect();
    for batch in data.batches_in_order(&order, batch_size.min(data.len()).max(1)) {
        let (_, grads) = loss_and_grads(model, &batch, &LossSpec::cross_entropy(), false)?;
        if weighted {
            for ((a, &g), &t) in acc.iter_mut().zip(&grads).zip(model.params()) {
                *a += f64::from(t) * g;
            }
        } else {
            for (a, &g) in acc.iter_mut().zip(&grads) {
                *a += g;
            }
        }
    }
    Ok(acc)
}

/// Compute parameter scores `s_j` under `criterion` and aggregate them into
/// per-neuron scores as the mean of each group's top `h` parameter scores.
pub fn criticality_scores(
    model: &Model,
    data: &DatasetView<'_>,
    criterion: Criterion,
    h: usize,
    batch_size: usize,
) -> Result<CriticalityScores> {
    if h == 0 {
        return Err(Error::Config("top-h aggregation needs h >= 1".into()));
    }
    let param_scores: Vec<f64> = match criterion {
        Criterion::WeightsOnly => model.params().iter().map(|&t| f64::from(t).abs()).collect(),
        Criterion::GradForget => accumulate_signed(model, data, batch_size, false)?
            .into_iter()
            .map(f64::abs)
            .collect(),
        Criterion::WeightedGradTrain | Criterion::WeightedGradForget => {
            accumulate_signed(model, data, batch_size, true)?
                .into_iter()
                .map(f64::abs)
                .collect()
        }
    };
    let neuron_scores = aggregate_neuron_scores(model, &param_scores, h);
    Ok(CriticalityScores {
        param_scores,
        neuron_scores,
        h,
        criterion,
    })
}

/// Top-h mean of `param_scores` within each neuron group.
pub fn aggregate_neuron_scores(
    model: &Model,
    param_scores: &[f64],
    h: usize,
) -> Vec<NeuronScore> {
    model
        .neuron_groups()
        .into_iter()
        .map(|g| {
            let mut scores: Vec<f64> = param_scores[g.range.clone()].to_vec();
            scores.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite scores"));
            NeuronScore {
                layer: g.layer,
                neuron: g.neuron,
                score: neuron_topk_avg(&scores, h),
                param_count: g.range.len(),
            }
        })
        .collect()
}
