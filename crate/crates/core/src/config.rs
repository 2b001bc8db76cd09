//! Experiment configuration files, shared by the CLI and the benchmarks.
//!
//! ```json
//! {
//!   "dataset": { "synthetic": { "K": 12, "d": 8 } },
//!   "hyperparams": { "learning_rate": 0.005 },
//!   "seeds": [0, 1, 2, 3, 4]
//! }
//! ```
//!
//! Missing fields fall back to their defaults; unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic, load_manifest, IncrementalStream, LabeledDataset, SynthConfig};
use crate::error::{Error, Result};
use crate::trainer::HyperParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(SynthConfig),
    /// A manifest written by [`crate::data::write_dataset`]. Relative paths
    /// resolve against the config file's directory.
    Files { manifest: PathBuf },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub hyperparams: HyperParams,
    /// Seeds for multi-seed runs; empty means just `hyperparams.seed`.
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSpec::Files { manifest } = &mut cfg.dataset {
            if manifest.is_relative() {
                *manifest = base.join(&*manifest);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    /// The single-seed run of this experiment: the seed drives both training
    /// and, for synthetic data, the generator.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut next = self.clone();
        next.seeds = vec![seed];
        next.hyperparams.seed = seed;
        if let DatasetSpec::Synthetic(s) = &mut next.dataset {
            s.seed = seed;
        }
        next
    }

    /// `seeds`, or the single configured seed.
    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.hyperparams.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn materialize(&self) -> Result<(LabeledDataset, IncrementalStream)> {
        match &self.dataset {
            DatasetSpec::Synthetic(s) => gen_synthetic(s),
            DatasetSpec::Files { manifest } => load_manifest(manifest),
        }
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::json("<config>", e))
    }
}
