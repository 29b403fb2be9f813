use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::BoConfig;
use crate::mlp::{ArchitectureSpec, TrainConfig};
use crate::vae::VaeTrainConfig;

/// Fewest rows a pipeline run accepts.
pub const MIN_ROWS: usize = 20;

/// Shortest candidate training run during search.
pub const MIN_SEARCH_EPOCHS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1 }
    }
}

/// Everything a pipeline run depends on besides the data.
///
/// Every stage seed is derived from `seed`; the `seed` fields of the nested
/// `vae`, `bo` and `train` sections are overwritten at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub split: SplitConfig,
    pub vae: VaeTrainConfig,
    /// Synthetic rows per real training row; 0 disables the VAE stage.
    pub multiplier: usize,
    pub poly_order: usize,
    pub bo: BoConfig,
    /// Candidate training epochs; defaults to `max(train.epochs / 3, 50)`.
    pub search_epochs: Option<usize>,
    /// Full-budget settings for the initial and refinement stages.
    pub train: TrainConfig,
    /// Fixed architecture; when set the search stage is skipped.
    pub architecture: Option<ArchitectureSpec>,
    pub target_column: Option<String>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            vae: VaeTrainConfig::default(),
            multiplier: 20,
            poly_order: 2,
            bo: BoConfig::default(),
            search_epochs: None,
            train: TrainConfig::default(),
            architecture: None,
            target_column: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn effective_search_epochs(&self) -> usize {
        self.search_epochs
            .unwrap_or_else(|| (self.train.epochs / 3).max(MIN_SEARCH_EPOCHS))
    }

    pub fn validate(&self) -> Result<()> {
        let SplitConfig { train, val } = self.split;
        if !(train > 0.0 && val > 0.0 && train + val < 1.0) {
            return Err(Error::Config(format!(
                "split fractions must be positive with train + val < 1, got {train}/{val}"
            )));
        }
        if self.poly_order == 0 {
            return Err(Error::Config("poly_order must be >= 1".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be >= 1".into()));
        }
        if self.search_epochs == Some(0) {
            return Err(Error::Config("search_epochs must be >= 1".into()));
        }
        if !(self.vae.learning_rate > 0.0) || self.vae.batch_size == 0 || self.vae.epochs == 0 {
            return Err(Error::Config("vae learning_rate, batch_size and epochs must be positive".into()));
        }
        match &self.architecture {
            Some(spec) => spec.validate().map_err(|e| Error::Config(format!("architecture: {e}")))?,
            None => {
                self.bo.validate()?;
                if self.bo.budget < 2 {
                    return Err(Error::Config("bo.budget must be >= 2".into()));
                }
            }
        }
        Ok(())
    }
}
