//! Variational autoencoder over joint `[features, target]` rows, used to
//! synthesize additional training rows.
//!
//! Encoder: `d → 40 (ReLU) → {μ, log σ²}` with 20 latent dimensions.
//! Decoder: `20 → 40 (ReLU) → d` with an identity output. Training minimizes
//! the negative ELBO: summed squared reconstruction error plus the closed-form
//! KL divergence to `N(0, I)`, with `z = μ + σ⊙ε`.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::mlp::{flatten_grads, params_mut, Dense, Init};
use crate::numerics::{Adam, AdamConfig, Matrix, Rng};

pub const VAE_HIDDEN: usize = 40;
pub const VAE_LATENT: usize = 20;

/// Variance of the Gaussian likelihood `p(x|z)` whose negative log-density
/// is the summed squared reconstruction error, up to a constant.
pub const VAE_OUTPUT_VAR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 8,
            epochs: 200,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl VaeTrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "vae learning_rate, batch_size and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VaeWire", into = "VaeWire")]
pub struct VaeModel {
    input_width: usize,
    // enc_hidden, enc_mu, enc_logvar, dec_hidden, dec_out
    layers: Vec<Dense>,
}

const ENC_H: usize = 0;
const ENC_MU: usize = 1;
const ENC_LV: usize = 2;
const DEC_H: usize = 3;
const DEC_OUT: usize = 4;

/// Closed-form `KL(N(μ, diag σ²) ‖ N(0, I)) = −½ Σ (1 + log σ² − μ² − σ²)`.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

#[inline]
fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Per-sample intermediate values kept for backpropagation.
struct Trace {
    h_pre: Vec<f64>,
    h: Vec<f64>,
    mu: Vec<f64>,
    logvar: Vec<f64>,
    z: Vec<f64>,
    g_pre: Vec<f64>,
    g: Vec<f64>,
    out: Vec<f64>,
}

impl Trace {
    fn new(d: usize) -> Self {
        Self {
            h_pre: vec![0.0; VAE_HIDDEN],
            h: vec![0.0; VAE_HIDDEN],
            mu: vec![0.0; VAE_LATENT],
            logvar: vec![0.0; VAE_LATENT],
            z: vec![0.0; VAE_LATENT],
            g_pre: vec![0.0; VAE_HIDDEN],
            g: vec![0.0; VAE_HIDDEN],
            out: vec![0.0; d],
        }
    }
}

impl VaeModel {
    pub fn new(input_width: usize, rng: &mut Rng) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::InvalidArgument("vae input width must be >= 1".into()));
        }
        let layers = vec![
            Dense::init(input_width, VAE_HIDDEN, Init::He, rng),
            Dense::init(VAE_HIDDEN, VAE_LATENT, Init::Xavier, rng),
            Dense::init(VAE_HIDDEN, VAE_LATENT, Init::Xavier, rng),
            Dense::init(VAE_LATENT, VAE_HIDDEN, Init::He, rng),
            Dense::init(VAE_HIDDEN, input_width, Init::Xavier, rng),
        ];
        Ok(Self { input_width, layers })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Encoder outputs `(μ, log σ²)` for one row.
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_width {
            return Err(Error::Dimension(format!(
                "vae expects {} columns, got {}",
                self.input_width,
                x.len()
            )));
        }
        let mut t = Trace::new(self.input_width);
        self.encode_into(x, &mut t);
        Ok((t.mu, t.logvar))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != VAE_LATENT {
            return Err(Error::Dimension(format!("latent width is {VAE_LATENT}, got {}", z.len())));
        }
        let mut t = Trace::new(self.input_width);
        t.z.copy_from_slice(z);
        self.decode_into(&mut t);
        Ok(t.out)
    }

    fn encode_into(&self, x: &[f64], t: &mut Trace) {
        self.layers[ENC_H].forward_into(x, &mut t.h_pre);
        t.h.copy_from_slice(&t.h_pre);
        relu_in_place(&mut t.h);
        self.layers[ENC_MU].forward_into(&t.h, &mut t.mu);
        self.layers[ENC_LV].forward_into(&t.h, &mut t.logvar);
    }

    fn decode_into(&self, t: &mut Trace) {
        self.layers[DEC_H].forward_into(&t.z, &mut t.g_pre);
        t.g.copy_from_slice(&t.g_pre);
        relu_in_place(&mut t.g);
        self.layers[DEC_OUT].forward_into(&t.g, &mut t.out);
    }

    /// One sample's negative ELBO for a fixed noise draw `eps`; gradients
    /// (scaled by `scale`) are added into `grads`.
    fn sample_loss_grad(&self, x: &[f64], eps: &[f64], scale: f64, t: &mut Trace, grads: &mut [Dense]) -> f64 {
        self.encode_into(x, t);
        for k in 0..VAE_LATENT {
            t.z[k] = t.mu[k] + (0.5 * t.logvar[k]).exp() * eps[k];
        }
        self.decode_into(t);

        let recon: f64 = t.out.iter().zip(x).map(|(o, v)| (o - v).powi(2)).sum();
        let kl = kl_divergence(&t.mu, &t.logvar);

        let d_out: Vec<f64> = t.out.iter().zip(x).map(|(o, v)| 2.0 * (o - v) * scale).collect();
        let mut d_g = vec![0.0; VAE_HIDDEN];
        self.layers[DEC_OUT].backward_into(&t.g, &d_out, &mut grads[DEC_OUT], Some(&mut d_g));
        for (d, &p) in d_g.iter_mut().zip(&t.g_pre) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        let mut d_z = vec![0.0; VAE_LATENT];
        self.layers[DEC_H].backward_into(&t.z, &d_g, &mut grads[DEC_H], Some(&mut d_z));

        let mut d_mu = vec![0.0; VAE_LATENT];
        let mut d_lv = vec![0.0; VAE_LATENT];
        for k in 0..VAE_LATENT {
            let sigma = (0.5 * t.logvar[k]).exp();
            d_mu[k] = d_z[k] + scale * t.mu[k];
            d_lv[k] = d_z[k] * eps[k] * 0.5 * sigma + scale * 0.5 * (t.logvar[k].exp() - 1.0);
        }
        let mut d_h = vec![0.0; VAE_HIDDEN];
        let mut d_h2 = vec![0.0; VAE_HIDDEN];
        self.layers[ENC_MU].backward_into(&t.h, &d_mu, &mut grads[ENC_MU], Some(&mut d_h));
        self.layers[ENC_LV].backward_into(&t.h, &d_lv, &mut grads[ENC_LV], Some(&mut d_h2));
        for ((d, d2), &p) in d_h.iter_mut().zip(&d_h2).zip(&t.h_pre) {
            *d = if p > 0.0 { *d + d2 } else { 0.0 };
        }
        self.layers[ENC_H].backward_into(x, &d_h, &mut grads[ENC_H], None);

        recon + kl
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers.iter().map(|l| Dense::zeros(l.n_in(), l.n_out())).collect()
    }

    /// Mean negative ELBO over the rows of `x` with fixed noise `eps`
    /// (one row of 20 draws per sample), and its gradient per layer.
    pub fn loss_and_grad(&self, x: &Matrix, eps: &Matrix) -> Result<(f64, Vec<Dense>)> {
        if x.cols() != self.input_width || eps.cols() != VAE_LATENT || x.rows() != eps.rows() {
            return Err(Error::Dimension("vae batch and noise shapes disagree".into()));
        }
        if x.rows() == 0 {
            return Err(Error::EmptyDataset("empty batch".into()));
        }
        let scale = 1.0 / x.rows() as f64;
        let mut t = Trace::new(self.input_width);
        let mut grads = self.zero_grads();
        let mut total = 0.0;
        for i in 0..x.rows() {
            total += self.sample_loss_grad(x.row(i), eps.row(i), scale, &mut t, &mut grads);
        }
        Ok((total * scale, grads))
    }
}

/// Trains a VAE on the (normalized) joint `[features, target]` rows.
///
/// Returns the model and the per-epoch mean loss.
pub fn vae_train(d: &Dataset, cfg: &VaeTrainConfig) -> Result<(VaeModel, Vec<f64>)> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset("cannot train a VAE on an empty dataset".into()));
    }
    let x = d.joint_matrix();
    let mut rng = Rng::new(cfg.seed);
    let mut model = VaeModel::new(x.cols(), &mut rng)?;
    let mut adam = Adam::new(cfg.learning_rate, cfg.adam);
    let mut t = Trace::new(x.cols());
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut eps = vec![0.0; VAE_LATENT];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.scale(0.0));
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                eps.iter_mut().for_each(|e| *e = rng.standard_normal());
                total += model.sample_loss_grad(x.row(i), &eps, scale, &mut t, &mut grads);
            }
            adam.step(&mut params_mut(&mut model.layers), &flatten_grads(&grads));
        }
        let mean = total / x.rows() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(mean);
    }
    Ok((model, trace))
}

/// Draws `count` rows `x ~ N(decoder(z), VAE_OUTPUT_VAR·I)` with
/// `z ~ N(0, I)`; rows are in normalized space.
///
/// The decoder mean alone is under-dispersed: on unit-variance data its
/// spread tends to `sqrt(1 - VAE_OUTPUT_VAR)` at the optimum of the loss.
pub fn vae_generate(m: &VaeModel, count: usize, rng: &mut Rng) -> Matrix {
    let sd = VAE_OUTPUT_VAR.sqrt();
    let mut out = Matrix::zeros(count, m.input_width);
    let mut t = Trace::new(m.input_width);
    for i in 0..count {
        t.z.iter_mut().for_each(|z| *z = rng.standard_normal());
        m.decode_into(&mut t);
        for (o, mean) in out.row_mut(i).iter_mut().zip(&t.out) {
            *o = mean + sd * rng.standard_normal();
        }
    }
    out
}

/// Appends `multiplier · n` synthetic rows (flagged) after the original rows.
pub fn augment_dataset(d: &Dataset, m: &VaeModel, multiplier: usize, rng: &mut Rng) -> Result<Dataset> {
    if m.input_width != d.n_features() + 1 {
        return Err(Error::Dimension(format!(
            "vae models {} columns, dataset has {}",
            m.input_width,
            d.n_features() + 1
        )));
    }
    if multiplier == 0 {
        return Ok(d.clone());
    }
    let rows = vae_generate(m, d.len() * multiplier, rng);
    if !rows.is_finite() {
        return Err(Error::NonFinite("vae generated non-finite rows".into()));
    }
    let nf = d.n_features();
    let features = rows.map_rows(nf, |r| r[..nf].to_vec());
    let targets = rows.iter_rows().map(|r| r[nf]).collect();
    let synthetic = Dataset::with_flags(
        d.feature_names().to_vec(),
        d.target_name(),
        features,
        targets,
        vec![true; rows.rows()],
    )?;
    d.concat(&synthetic)
}

#[derive(Serialize, Deserialize)]
struct VaeWire {
    kind: String,
    input_width: usize,
    hidden: usize,
    latent: usize,
    layers: Vec<Dense>,
    format_version: u64,
}

impl From<VaeModel> for VaeWire {
    fn from(m: VaeModel) -> Self {
        Self {
            kind: "vae".into(),
            input_width: m.input_width,
            hidden: VAE_HIDDEN,
            latent: VAE_LATENT,
            layers: m.layers,
            format_version: crate::mlp::MODEL_FORMAT_VERSION,
        }
    }
}

impl TryFrom<VaeWire> for VaeModel {
    type Error = Error;

    fn try_from(w: VaeWire) -> Result<Self> {
        if w.kind != "vae" {
            return Err(Error::Schema(format!("expected kind \"vae\", found {:?}", w.kind)));
        }
        if w.format_version != crate::mlp::MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: w.format_version,
                expected: crate::mlp::MODEL_FORMAT_VERSION,
            });
        }
        let d = w.input_width;
        let shapes = [
            (d, VAE_HIDDEN),
            (VAE_HIDDEN, VAE_LATENT),
            (VAE_HIDDEN, VAE_LATENT),
            (VAE_LATENT, VAE_HIDDEN),
            (VAE_HIDDEN, d),
        ];
        if w.hidden != VAE_HIDDEN || w.latent != VAE_LATENT || w.layers.len() != shapes.len() {
            return Err(Error::Schema("vae layer layout mismatch".into()));
        }
        for (l, s) in w.layers.iter().zip(shapes) {
            if l.w.shape() != s || l.b.len() != s.1 || !l.is_finite() {
                return Err(Error::Schema(format!("vae layer shape {:?}, expected {s:?}", l.w.shape())));
            }
        }
        Ok(Self {
            input_width: d,
            layers: w.layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_toy(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_vec(n, 1, (0..n).map(|_| rng.standard_normal()).collect()).unwrap();
        let y = (0..n).map(|_| rng.standard_normal()).collect();
        Dataset::from_xy(x, y).unwrap()
    }

    #[test]
    fn kl_closed_form() {
        assert_eq!(kl_divergence(&[0.0; 20], &[0.0; 20]), 0.0);
        let mut mu = [0.0; 20];
        mu[0] = 1.0;
        assert!((kl_divergence(&mu, &[0.0; 20]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn generation_is_seeded_and_shaped() {
        let m = VaeModel::new(3, &mut Rng::new(1)).unwrap();
        let a = vae_generate(&m, 5, &mut Rng::new(4));
        let b = vae_generate(&m, 5, &mut Rng::new(4));
        assert_eq!(a, b);
        assert_eq!(vae_generate(&m, 1, &mut Rng::new(4)).shape(), (1, 3));
    }

    #[test]
    fn augmentation_counts_and_order() {
        let d = gaussian_toy(20, 2);
        let m = VaeModel::new(2, &mut Rng::new(1)).unwrap();
        let out = augment_dataset(&d, &m, 20, &mut Rng::new(3)).unwrap();
        assert_eq!(out.len(), 420);
        assert_eq!(out.n_synthetic(), 400);
        assert_eq!(out.select(&(0..20).collect::<Vec<_>>()), d);
        let once = augment_dataset(&d, &m, 1, &mut Rng::new(3)).unwrap();
        assert_eq!(once.len(), 40);
    }

    #[test]
    fn short_training_reduces_loss() {
        let d = gaussian_toy(64, 5);
        let cfg = VaeTrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            seed: 7,
            ..Default::default()
        };
        let (_, trace) = vae_train(&d, &cfg).unwrap();
        assert_eq!(trace.len(), 30);
        assert!(trace.last().unwrap() < &trace[0]);
    }

    #[test]
    fn json_round_trip() {
        let m = VaeModel::new(4, &mut Rng::new(1)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.starts_with(r#"{"kind":"vae""#));
        let back: VaeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = gaussian_toy(4, 1).select(&[]);
        assert!(vae_train(&d, &VaeTrainConfig::default()).is_err());
    }
}
