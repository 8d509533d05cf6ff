//! Output directory layout and atomic file writes.
//!
//! ```text
//! <root>/<config-hash>/
//!   original/seed_<s>/model.ckpt + manifest.toml
//!   oracle/seed_<s>/model.ckpt + metrics.toml + manifest.toml
//!   cells/<strategy>/<algorithm>/alpha_<label>/seed_<s>/
//!       model.ckpt + mask.bin + metrics.toml + manifest.toml
//!   summary.csv / summary.txt / sweep_curves.csv
//! ```
//!
//! Manifests are written last via temp-file + rename, so a manifest's
//! presence marks a complete, resumable cell.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Paths inside one experiment's output tree.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(output_root: &Path, config_hash: &str) -> Layout {
        Layout {
            root: output_root.join(config_hash),
        }
    }

    pub fn original_dir(&self, seed: u64) -> PathBuf {
        self.root.join("original").join(format!("seed_{seed}"))
    }

    pub fn oracle_dir(&self, seed: u64) -> PathBuf {
        self.root.join("oracle").join(format!("seed_{seed}"))
    }

    pub fn cell_dir(&self, strategy: &str, algorithm: &str, alpha_label: &str, seed: u64) -> PathBuf {
        self.root
            .join("cells")
            .join(strategy)
            .join(algorithm)
            .join(format!("alpha_{alpha_label}"))
            .join(format!("seed_{seed}"))
    }

    /// Learning-rate trial runs for the sweep's candidate selection.
    pub fn trial_dir(
        &self,
        strategy: &str,
        algorithm: &str,
        alpha_label: &str,
        lr: f64,
        seed: u64,
    ) -> PathBuf {
        self.root
            .join("cells")
            .join(strategy)
            .join(algorithm)
            .join(format!("alpha_{alpha_label}"))
            .join(format!("lr_trial_{lr}"))
            .join(format!("seed_{seed}"))
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn summary_text(&self) -> PathBuf {
        self.root.join("summary.txt")
    }

    pub fn sweep_curves_csv(&self) -> PathBuf {
        self.root.join("sweep_curves.csv")
    }
}

/// Fixed file names within run directories.
pub const MODEL_FILE: &str = "model.ckpt";
pub const MASK_FILE: &str = "mask.bin";
pub const METRICS_FILE: &str = "metrics.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Stable directory label for a budget value.
pub fn alpha_label(alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("{a}"),
        None => "auto".to_string(),
    }
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Write a file atomically: write to `<name>.tmp`, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path
        .parent()
        .ok_or_else(|| Error::Config(format!("no parent for {}", path.display())))?;
    ensure_dir(parent)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
