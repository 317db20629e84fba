//! Run configuration and its content hash.

use std::path::{Path, PathBuf};

use brainalign_core::evalcls::ClassifierConfig;
use brainalign_core::featprep::NormMode;
use brainalign_core::ridge::{FoldPlan, LambdaGrid};
use brainalign_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything that determines the numbers a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub features: PathBuf,
    pub brain: PathBuf,
    /// Cortical adjacency; required for fMRI runs.
    pub adjacency: Option<PathBuf>,
    pub rois: Option<PathBuf>,
    /// TR delays of the fMRI design (ignored for MEG).
    pub delays: Vec<usize>,
    pub folds: FoldPlan,
    pub lambda_grid: LambdaGrid,
    pub classifier: ClassifierConfig,
    pub norm: NormMode,
    pub q: f64,
    /// Accuracy threshold for the ROI table.
    pub threshold: f64,
    pub save_weights: bool,
    pub out: PathBuf,
}

impl RunConfig {
    /// Defaults for everything except the input and output paths.
    pub fn with_paths(features: PathBuf, brain: PathBuf, out: PathBuf) -> Self {
        RunConfig {
            features,
            brain,
            adjacency: None,
            rois: None,
            delays: vec![1, 2, 3, 4],
            folds: FoldPlan::default(),
            lambda_grid: LambdaGrid::default(),
            classifier: ClassifierConfig::default(),
            norm: NormMode::default(),
            q: 0.05,
            threshold: 0.7,
            save_weights: false,
            out,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        if self.folds.n_outer < 2 || self.folds.n_nested < 2 {
            return Err(Error::Config(format!(
                "need at least 2 outer and 2 nested folds, got {} and {}",
                self.folds.n_outer, self.folds.n_nested
            )));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Parses `1,2,3,4`.
pub fn parse_delays(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("cannot parse delay list {s:?}")))
        })
        .collect()
}
