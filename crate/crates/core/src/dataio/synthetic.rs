use super::Dataset;
use crate::error::Result;
use crate::numerics::{Matrix, Rng};

/// Two-feature regression task `y = offset + x₁² + 0.3·sin(6x₂) + ε` with
/// `x ~ U(−1, 1)²` and `ε ~ N(0, noise_sd²)`.
pub fn synthetic_task(n: usize, noise_sd: f64, offset: f64, seed: u64) -> Result<Dataset> {
    let mut rng = Rng::new(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.uniform_range(-1.0, 1.0);
        let x2 = rng.uniform_range(-1.0, 1.0);
        x.extend_from_slice(&[x1, x2]);
        y.push(offset + x1 * x1 + 0.3 * (6.0 * x2).sin() + noise_sd * rng.standard_normal());
    }
    Dataset::new(
        vec!["x1".into(), "x2".into()],
        "y",
        Matrix::from_vec(n, 2, x)?,
        y,
    )
}
