//! Prediction accuracy.

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::nn::{forward, Model};

/// Batch size used when sweeping a view for evaluation.
pub(crate) const EVAL_BATCH: usize = 256;

/// Fraction of argmax-correct predictions over the view. Argmax ties go to
/// the lowest class index.
pub fn accuracy(model: &Model, data: &DatasetView<'_>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("accuracy over an empty view".into()));
    }
    let order: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for batch in data.batches_in_order(&order, EVAL_BATCH.min(data.len())) {
        let logits = forward(model, &batch)?;
        for i in 0..batch.len() {
            if logits.argmax(i) == batch.labels[i] as usize {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
