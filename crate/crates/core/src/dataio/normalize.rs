use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-column z-score statistics; the last entry belongs to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl NormStats {
    pub fn n_features(&self) -> usize {
        self.means.len().saturating_sub(1)
    }

    pub fn target_mean(&self) -> f64 {
        *self.means.last().expect("stats include a target column")
    }

    pub fn target_std(&self) -> f64 {
        *self.stds.last().expect("stats include a target column")
    }

    /// `(x − μ)/σ`, with zero-variance columns mapped to 0.
    #[inline]
    pub fn forward(&self, col: usize, x: f64) -> f64 {
        let s = self.stds[col];
        if s > 0.0 {
            (x - self.means[col]) / s
        } else {
            0.0
        }
    }

    #[inline]
    pub fn inverse(&self, col: usize, z: f64) -> f64 {
        z * self.stds[col] + self.means[col]
    }

    pub fn normalize_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(x.iter().enumerate().map(|(j, &v)| self.forward(j, v)).collect())
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        self.forward(self.n_features(), y)
    }

    pub fn denormalize_target(&self, z: f64) -> f64 {
        self.inverse(self.n_features(), z)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.means.len() != self.stds.len() || self.means.is_empty() {
            return Err(Error::Schema("normalization stats have inconsistent lengths".into()));
        }
        if self.stds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Schema("normalization stats must be finite with std >= 0".into()));
        }
        Ok(())
    }
}

/// Population mean and standard deviation (ddof = 0) of every feature column
/// and the target.
pub fn fit_normalizer(d: &Dataset) -> Result<NormStats> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("cannot fit normalizer on an empty dataset".into()));
    }
    let joint = d.joint_matrix();
    let n = joint.rows() as f64;
    let mut means = Vec::with_capacity(joint.cols());
    let mut stds = Vec::with_capacity(joint.cols());
    for j in 0..joint.cols() {
        let col = joint.col_values(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok(NormStats { means, stds })
}

/// Applies (or with `invert`, undoes) the z-score transform to features and target.
pub fn apply_normalizer(d: &Dataset, s: &NormStats, invert: bool) -> Result<Dataset> {
    if s.means.len() != d.n_features() + 1 || s.stds.len() != s.means.len() {
        return Err(Error::Dimension(format!(
            "stats cover {} columns, dataset has {}",
            s.means.len(),
            d.n_features() + 1
        )));
    }
    let t = |col: usize, v: f64| if invert { s.inverse(col, v) } else { s.forward(col, v) };
    let mut features = d.features().clone();
    let cols = features.cols();
    for i in 0..features.rows() {
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            *v = t(j, *v);
        }
    }
    let targets = d.targets().iter().map(|&y| t(cols, y)).collect();
    Dataset::with_flags(
        d.feature_names().to_vec(),
        d.target_name(),
        features,
        targets,
        d.synthetic_flags().to_vec(),
    )
}
