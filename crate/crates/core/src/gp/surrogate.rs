use super::kernel::{distance, matern52, GpHyper};
use crate::error::{Error, Result};
use crate::numerics::{cholesky_factor, Cholesky, Matrix};

/// Lower bound on the observation-noise variance.
pub const MIN_NOISE: f64 = 1e-8;

const LENGTH_SCALES: (f64, f64, usize) = (0.05, 2.0, 8);
const SIGNAL_VARS: [f64; 3] = [0.25, 1.0, 4.0];
const NOISE_VARS: (f64, f64, usize) = (1e-6, 1e-1, 6);

fn log_space((lo, hi, n): (f64, f64, usize)) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

/// Hyperparameter grid searched by [`GpSurrogate::fit`]: length scale
/// outermost, noise innermost.
pub fn hyper_grid() -> Vec<GpHyper> {
    let mut out = Vec::new();
    for length_scale in log_space(LENGTH_SCALES) {
        for signal_var in SIGNAL_VARS {
            for noise_var in log_space(NOISE_VARS) {
                out.push(GpHyper {
                    length_scale,
                    signal_var,
                    noise_var,
                });
            }
        }
    }
    out
}

fn gram(dist: &Matrix, h: &GpHyper) -> Matrix {
    let n = dist.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = matern52(dist[(i, j)], h.length_scale, h.signal_var);
        }
        k[(i, i)] += h.noise_var.max(MIN_NOISE);
    }
    k
}

fn distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = distance(x.row(i), x.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

struct Factored {
    chol: Cholesky,
    alpha: Vec<f64>,
    lml: f64,
}

fn factor(dist: &Matrix, y: &[f64], h: &GpHyper) -> Result<Factored> {
    let chol = cholesky_factor(&gram(dist, h), 0.0)?;
    let alpha = chol.solve_vec(y)?;
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    Ok(Factored { chol, alpha, lml })
}

/// `log p(y | X, θ)` for a zero-mean GP with the given hyperparameters.
pub fn log_marginal_likelihood(x: &Matrix, y: &[f64], hyper: &GpHyper) -> Result<f64> {
    hyper.validate()?;
    check_inputs(x, y, 1)?;
    Ok(factor(&distances(x), y, hyper)?.lml)
}

fn check_inputs(x: &Matrix, y: &[f64], min: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} points but {} values", x.rows(), y.len())));
    }
    if x.rows() < min {
        return Err(Error::InvalidArgument(format!("need at least {min} observations, got {}", x.rows())));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GP observations".into()));
    }
    Ok(())
}

/// Zero-mean Matérn 5/2 GP on standardized targets.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    x: Matrix,
    y: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    hyper: GpHyper,
    chol: Cholesky,
    alpha: Vec<f64>,
    lml: f64,
}

impl GpSurrogate {
    /// Fits with the hyperparameters that maximize the log marginal
    /// likelihood over [`hyper_grid`]. The first maximum wins ties.
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        check_inputs(x, y, 2)?;
        let (ys, mean, scale) = standardize(y);
        let dist = distances(x);
        let mut best: Option<(GpHyper, Factored)> = None;
        for h in hyper_grid() {
            let Ok(f) = factor(&dist, &ys, &h) else { continue };
            if !f.lml.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| f.lml > b.lml) {
                best = Some((h, f));
            }
        }
        let (hyper, f) = best.ok_or(Error::NotPositiveDefinite {
            jitter: crate::numerics::MAX_JITTER,
        })?;
        Ok(Self::assemble(x, ys, mean, scale, hyper, f))
    }

    /// Fits with fixed hyperparameters (noise floored at [`MIN_NOISE`]).
    pub fn fit_with(x: &Matrix, y: &[f64], hyper: GpHyper) -> Result<Self> {
        hyper.validate()?;
        check_inputs(x, y, 1)?;
        let hyper = GpHyper {
            noise_var: hyper.noise_var.max(MIN_NOISE),
            ..hyper
        };
        let (ys, mean, scale) = standardize(y);
        let f = factor(&distances(x), &ys, &hyper)?;
        Ok(Self::assemble(x, ys, mean, scale, hyper, f))
    }

    fn assemble(x: &Matrix, y: Vec<f64>, y_mean: f64, y_scale: f64, hyper: GpHyper, f: Factored) -> Self {
        Self {
            x: x.clone(),
            y,
            y_mean,
            y_scale,
            hyper,
            chol: f.chol,
            alpha: f.alpha,
            lml: f.lml,
        }
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn n_points(&self) -> usize {
        self.x.rows()
    }

    pub fn dims(&self) -> usize {
        self.x.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.x
    }

    /// Observations on the standardized scale.
    pub fn standardized_targets(&self) -> &[f64] {
        &self.y
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.y_scale
    }

    /// Latent mean and variance on the standardized scale.
    pub fn posterior_standardized(&self, a: &[f64]) -> Result<(f64, f64)> {
        if a.len() != self.dims() {
            return Err(Error::Dimension(format!("query has {} coordinates, expected {}", a.len(), self.dims())));
        }
        let h = &self.hyper;
        let k: Vec<f64> =
            self.x.iter_rows().map(|r| matern52(distance(r, a), h.length_scale, h.signal_var)).collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.forward(&k)?;
        let var = (h.signal_var - v.iter().map(|t| t * t).sum::<f64>()).max(0.0);
        Ok((mean, var))
    }

    /// Latent mean and variance in objective units.
    pub fn posterior(&self, a: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.posterior_standardized(a)?;
        Ok((self.y_mean + self.y_scale * m, v * self.y_scale * self.y_scale))
    }
}

/// Population z-scores; a constant series keeps scale 1.
fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (y.iter().map(|v| (v - mean) / scale).collect(), mean, scale)
}
