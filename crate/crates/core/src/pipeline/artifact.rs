use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{poly_augment, poly_feature_count, NormStats};
use crate::error::{Error, Result};
use crate::mlp::{ArchitectureSpec, MlpModel};
use crate::numerics::Matrix;

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

/// Trained two-stage model plus everything needed to map raw features to a
/// prediction in target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub format_version: u32,
    pub norm_stats: NormStats,
    pub poly_order: usize,
    pub spec: ArchitectureSpec,
    pub stage1: MlpModel,
    pub stage2: MlpModel,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Sidecar file holding the search trace, if any.
    pub bo_trace: Option<String>,
}

impl PipelineArtifact {
    pub fn n_raw_features(&self) -> usize {
        self.norm_stats.n_features()
    }

    pub fn validate(&self) -> Result<()> {
        self.norm_stats.validate()?;
        let n = self.n_raw_features();
        if self.feature_names.len() != n {
            return Err(Error::Schema(format!(
                "{} feature names for {} normalized features",
                self.feature_names.len(),
                n
            )));
        }
        if self.poly_order == 0 {
            return Err(Error::Schema("poly_order must be >= 1".into()));
        }
        let width = poly_feature_count(n, self.poly_order);
        if self.stage1.input_width() != width {
            return Err(Error::Schema(format!(
                "stage1 expects {} inputs, polynomial features give {width}",
                self.stage1.input_width()
            )));
        }
        if self.stage2.input_width() != width + 1 {
            return Err(Error::Schema("stage2 input width must be stage1 input width + 1".into()));
        }
        if self.stage1.spec() != &self.spec || self.stage2.spec() != &self.spec {
            return Err(Error::Schema("stage models disagree with the artifact spec".into()));
        }
        Ok(())
    }

    /// Normalized, polynomial-expanded features of one raw row.
    pub fn features(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        let z = self.norm_stats.normalize_features(x_raw)?;
        poly_augment(&z, self.poly_order)
    }

    /// Stage-1 prediction in target units.
    pub fn predict_stage1(&self, x_raw: &[f64]) -> Result<f64> {
        let phi = self.features(x_raw)?;
        Ok(self.norm_stats.denormalize_target(self.stage1.forward(&phi)?))
    }

    /// `f₂([φ(x), f₁(φ(x))])` in target units.
    pub fn predict(&self, x_raw: &[f64]) -> Result<f64> {
        let mut phi = self.features(x_raw)?;
        let f1 = self.stage1.forward(&phi)?;
        phi.push(f1);
        Ok(self.norm_stats.denormalize_target(self.stage2.forward(&phi)?))
    }

    pub fn predict_batch(&self, x_raw: &Matrix) -> Result<Vec<f64>> {
        x_raw.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("artifact is not valid JSON: {e}")))?;
        let found = value
            .get("format_version")
            .ok_or_else(|| Error::Schema("artifact has no format_version".into()))?
            .as_u64()
            .ok_or_else(|| Error::Schema("format_version must be an integer".into()))?;
        if found != u64::from(ARTIFACT_FORMAT_VERSION) {
            return Err(Error::Version {
                found,
                expected: u64::from(ARTIFACT_FORMAT_VERSION),
            });
        }
        let artifact: Self = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        artifact.validate()?;
        Ok(artifact)
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_artifact(a: &PipelineArtifact, path: impl AsRef<Path>) -> Result<()> {
    a.validate()?;
    let mut text = a.to_json()?;
    text.push('\n');
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<PipelineArtifact> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PipelineArtifact::from_json(&text)
}
