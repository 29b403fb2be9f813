use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matérn 5/2 hyperparameters plus observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.signal_var > 0.0 && self.noise_var >= 0.0)
            || !self.length_scale.is_finite()
            || !self.signal_var.is_finite()
            || !self.noise_var.is_finite()
        {
            return Err(Error::InvalidArgument(format!("invalid kernel hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// `σ_f² (1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(−√5 r/ℓ)` at distance `r`.
#[inline]
pub fn matern52(r: f64, length_scale: f64, signal_var: f64) -> f64 {
    let s = 5f64.sqrt() * r / length_scale;
    signal_var * (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Matérn 5/2 covariance between two points.
pub fn kernel_eval(a: &[f64], b: &[f64], hyper: &GpHyper) -> Result<f64> {
    hyper.validate()?;
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("points of length {} and {}", a.len(), b.len())));
    }
    Ok(matern52(distance(a, b), hyper.length_scale, hyper.signal_var))
}
