//! Dataset loading, synthetic data, forget-set construction, and the MIA
//! calibration subset.

pub mod csv;
pub mod dataset;
pub mod idx;
pub mod split;
pub mod synthetic;

use std::path::PathBuf;

use crate::error::Result;

pub use csv::load_csv;
pub use dataset::{AccessLog, Batch, Dataset, DatasetView};
pub use idx::{load_idx, write_idx_f32, write_idx_u8};
pub use split::{
    make_split, mia_calibration_subset, CalibrationSubset, ForgetKind, ForgetSpec, SplitSet,
};
pub use synthetic::{MeanStructure, SyntheticSpec, BUMP_PATCH};

/// Where a dataset comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// IDX feature/label file pair.
    Idx {
        features: PathBuf,
        labels: PathBuf,
        num_classes: usize,
    },
    /// Headerless CSV, label first.
    Csv { path: PathBuf, num_classes: usize },
    /// Class-conditional Gaussians; `load` returns the train split.
    Synthetic(SyntheticSpec),
}

impl DataSource {
    /// Load the (train) dataset this source describes.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Idx {
                features,
                labels,
                num_classes,
            } => load_idx(features, labels, *num_classes),
            DataSource::Csv { path, num_classes } => load_csv(path, *num_classes),
            DataSource::Synthetic(spec) => Ok(spec.generate()?.0),
        }
    }
}
