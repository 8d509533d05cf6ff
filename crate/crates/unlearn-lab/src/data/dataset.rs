//! In-memory datasets, index views, and batching.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A labeled dataset held fully in memory. Features are row-major
/// `n x feature_len`, labels are class indices in `[0, num_classes)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
    pub feature_len: usize,
    pub num_classes: usize,
    /// FNV-1a hash of the raw feature/label bytes, for manifests.
    pub checksum: u64,
}

impl Dataset {
    /// Assemble and validate a dataset.
    pub fn new(
        name: impl Into<String>,
        features: Vec<f32>,
        labels: Vec<u32>,
        feature_len: usize,
        num_classes: usize,
    ) -> Result<Dataset> {
        let name = name.into();
        if labels.is_empty() {
            return Err(Error::Empty(format!("dataset '{name}' has no examples")));
        }
        if feature_len == 0 || features.len() != labels.len() * feature_len {
            return Err(Error::Dimension(format!(
                "dataset '{name}': {} feature values do not tile {} examples of length {}",
                features.len(),
                labels.len(),
                feature_len
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Validation(format!(
                "dataset '{name}': label {bad} out of range for {num_classes} classes"
            )));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "dataset '{name}': non-finite feature value {bad}"
            )));
        }
        let checksum = checksum(&features, &labels);
        Ok(Dataset {
            name,
            features,
            labels,
            feature_len,
            num_classes,
            checksum,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_len..(i + 1) * self.feature_len]
    }

    /// View over all examples.
    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            data: self,
            indices: (0..self.len()).collect(),
            access_log: None,
        }
    }

    /// View over a subset of examples.
    pub fn subset(&self, indices: Vec<usize>) -> DatasetView<'_> {
        debug_assert!(indices.iter().all(|&i| i < self.len()));
        DatasetView {
            data: self,
            indices,
            access_log: None,
        }
    }

    /// Per-class example counts.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

fn checksum(features: &[f32], labels: &[u32]) -> u64 {
    let mut h = crate::harness::hash::Fnv64::new();
    for v in features {
        h.write(&v.to_le_bytes());
    }
    for l in labels {
        h.write(&l.to_le_bytes());
    }
    h.finish()
}

/// Counts per-example reads, used to audit which examples an algorithm saw.
#[derive(Debug)]
pub struct AccessLog {
    counts: Vec<AtomicU64>,
}

impl AccessLog {
    pub fn new(n: usize) -> Arc<AccessLog> {
        Arc::new(AccessLog {
            counts: (0..n).map(|_| AtomicU64::new(0)).collect(),
        })
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index].load(Ordering::Relaxed)
    }

    pub fn total_over(&self, indices: &[usize]) -> u64 {
        indices.iter().map(|&i| self.count(i)).sum()
    }

    fn touch(&self, index: usize) {
        self.counts[index].fetch_add(1, Ordering::Relaxed);
    }
}

/// A read-only selection of dataset rows, the unit every training and
/// scoring routine consumes.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    data: &'a Dataset,
    indices: Vec<usize>,
    access_log: Option<Arc<AccessLog>>,
}

impl<'a> DatasetView<'a> {
    pub fn with_access_log(mut self, log: Arc<AccessLog>) -> Self {
        self.access_log = Some(log);
        self
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn num_classes(&self) -> usize {
        self.data.num_classes
    }

    pub fn feature_len(&self) -> usize {
        self.data.feature_len
    }

    /// Label of the `pos`-th example of the view.
    pub fn label_at(&self, pos: usize) -> u32 {
        self.data.labels[self.indices[pos]]
    }

    /// Restrict to positions selected by a predicate on (underlying index, label).
    pub fn filtered(&self, keep: impl Fn(usize, u32) -> bool) -> DatasetView<'a> {
        DatasetView {
            data: self.data,
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| keep(i, self.data.labels[i]))
                .collect(),
            access_log: self.access_log.clone(),
        }
    }

    /// Materialize the examples at view positions `positions` into a batch.
    pub fn gather(&self, positions: &[usize]) -> Batch {
        let d = self.data.feature_len;
        let mut features = Vec::with_capacity(positions.len() * d);
        let mut labels = Vec::with_capacity(positions.len());
        for &pos in positions {
            let idx = self.indices[pos];
            if let Some(log) = &self.access_log {
                log.touch(idx);
            }
            features.extend_from_slice(self.data.feature_row(idx));
            labels.push(self.data.labels[idx]);
        }
        Batch {
            features,
            labels,
            feature_len: d,
        }
    }

    /// The whole view as one batch.
    pub fn full_batch(&self) -> Batch {
        let positions: Vec<usize> = (0..self.len()).collect();
        self.gather(&positions)
    }

    /// Single example as a batch of one.
    pub fn example(&self, pos: usize) -> Batch {
        self.gather(&[pos])
    }

    /// Split view positions into consecutive chunks of `batch_size`
    /// following `order` (a permutation of 0..len).
    pub fn batches_in_order(&self, order: &[usize], batch_size: usize) -> Vec<Batch> {
        assert!(batch_size > 0, "batch size must be positive");
        order
            .chunks(batch_size)
            .map(|chunk| self.gather(chunk))
            .collect()
    }

    /// Per-class counts of the view.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.data.num_classes];
        for &i in &self.indices {
            hist[self.data.labels[i] as usize] += 1;
        }
        hist
    }
}

/// A materialized mini-batch of examples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
    pub feature_len: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_len..(i + 1) * self.feature_len]
    }

    /// Hand-assemble a batch, for tests and toy fixtures.
    pub fn from_rows(rows: &[&[f32]], labels: &[u32]) -> Batch {
        assert_eq!(rows.len(), labels.len());
        assert!(!rows.is_empty());
        let d = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * d);
        for r in rows {
            assert_eq!(r.len(), d);
            features.extend_from_slice(r);
        }
        Batch {
            features,
            labels: labels.to_vec(),
            feature_len: d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::new(
            "tiny",
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0, 1, 0],
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = Dataset::new("bad", vec![0.0, 1.0], vec![2], 2, 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_empty_and_misshapen() {
        assert!(matches!(
            Dataset::new("e", vec![], vec![], 2, 2).unwrap_err(),
            Error::Empty(_)
        ));
        assert!(matches!(
            Dataset::new("m", vec![0.0; 5], vec![0, 1], 2, 2).unwrap_err(),
            Error::Dimension(_)
        ));
    }

    #[test]
    fn access_log_counts_reads() {
        let ds = tiny();
        let log = AccessLog::new(ds.len());
        let view = ds.subset(vec![0, 2]).with_access_log(log.clone());
        let _ = view.full_batch();
        let _ = view.example(0);
        assert_eq!(log.count(0), 2);
        assert_eq!(log.count(1), 0);
        assert_eq!(log.count(2), 1);
    }

    #[test]
    fn gather_respects_view_indirection() {
        let ds = tiny();
        let view = ds.subset(vec![2, 0]);
        let b = view.gather(&[0]);
        assert_eq!(b.labels, vec![0]);
        assert_eq!(b.feature_row(0), &[4.0, 5.0]);
    }
}
