//! Run manifests: provenance for every produced artifact. A manifest is
//! written atomically as the last step of a run, so its presence marks the
//! run complete; the resume flag keys off it. Wall times live here and not
//! in metric files, which must be byte-reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::layout::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// "original", "oracle", or "unlearn".
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_taken: Option<usize>,
    /// Content hashes of the inputs (dataset checksum, source checkpoints).
    #[serde(default)]
    pub input_hashes: Vec<String>,
    /// Files this run produced, relative to the run directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Per-stage wall-clock milliseconds.
    #[serde(default)]
    pub wall_ms: BTreeMap<String, u64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(stage: &str, config_hash: &str, seed: u64) -> Manifest {
        Manifest {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            strategy: None,
            algorithm: None,
            alpha: None,
            chosen_lr: None,
            steps_taken: None,
            input_hashes: Vec::new(),
            artifacts: Vec::new(),
            wall_ms: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            offset: 0,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        let mut m = Manifest::new("unlearn", "cafe", 3);
        m.strategy = Some("del".into());
        m.algorithm = Some("rft".into());
        m.alpha = Some("0.16".into());
        m.steps_taken = Some(128);
        m.input_hashes.push("abcd".into());
        m.wall_ms.insert("mask".into(), 12);
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.stage, "unlearn");
        assert_eq!(back.strategy.as_deref(), Some("del"));
        assert_eq!(back.steps_taken, Some(128));
        assert_eq!(back.wall_ms["mask"], 12);
    }
}
