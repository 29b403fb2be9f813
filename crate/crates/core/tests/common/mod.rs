//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use roughnas::dataio::Dataset;
use roughnas::mlp::Dense;
use roughnas::{Activation, ArchitectureSpec, Loss, Matrix, MlpModel, Rng};

/// Denominator floor of the relative-error measure used by gradient checks.
/// Central differences at h = 1e-5 carry about ε·|loss|/h ≈ 1e-10 of
/// absolute roundoff, so relative error is only meaningful above this scale.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Random network with 1..=3 hidden layers of width 10..=12 and non-zero
/// biases.
pub fn random_net(act: Activation, loss: Loss, input_width: usize, rng: &mut Rng) -> MlpModel {
    let spec = ArchitectureSpec {
        hidden_layers: 1 + rng.below(3),
        neurons_per_layer: 10 + rng.below(3),
        activation: act,
        batch_size: 8,
        learning_rate: 1e-3,
        loss,
    };
    let mut layers = MlpModel::build(spec, input_width, rng).unwrap().layers().to_vec();
    for l in &mut layers {
        for b in l.b.iter_mut() {
            *b = rng.uniform_range(-0.3, 0.3);
        }
    }
    MlpModel::from_parts(spec, input_width, layers).unwrap()
}

/// Largest relative error between backprop and central differences over
/// every parameter of `m` on the batch `(x, y)`.
pub fn mlp_gradient_error(m: &MlpModel, x: &Matrix, y: &[f64], loss: Loss, h: f64) -> f64 {
    let (_, grads) = m.loss_and_grad(x, y, loss).unwrap();
    let loss_at = |layers: Vec<Dense>| {
        let p = MlpModel::from_parts(*m.spec(), m.input_width(), layers).unwrap();
        p.loss_and_grad(x, y, loss).unwrap().0
    };
    let mut worst = 0.0f64;
    for (k, layer) in m.layers().iter().enumerate() {
        let n_w = layer.w.as_slice().len();
        for idx in 0..n_w + layer.b.len() {
            let bump = |delta: f64| {
                let mut layers = m.layers().to_vec();
                if idx < n_w {
                    layers[k].w.as_mut_slice()[idx] += delta;
                } else {
                    layers[k].b[idx - n_w] += delta;
                }
                loss_at(layers)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            let g = &grads.layers[k];
            let analytic = if idx < n_w { g.w.as_slice()[idx] } else { g.b[idx - n_w] };
            worst = worst.max(rel_err(analytic, numeric));
        }
    }
    worst
}

/// Inputs in [-1, 1] and targets offset so that L1 residuals stay far from
/// the kink at zero.
pub fn grad_batch(n: usize, width: usize, rng: &mut Rng) -> (Matrix, Vec<f64>) {
    let x: Vec<f64> = (0..n * width).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let y = (0..n)
        .map(|_| {
            let s = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            s * rng.uniform_range(3.0, 5.0)
        })
        .collect();
    (Matrix::from_vec(n, width, x).unwrap(), y)
}

/// Inverse of a small matrix by Gauss-Jordan elimination with partial
/// pivoting.
pub fn naive_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let row_c = m[c].clone();
                for (v, rc) in m[r].iter_mut().zip(row_c) {
                    *v -= f * rc;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Matérn 5/2 covariance written out directly.
pub fn matern52_direct(a: &[f64], b: &[f64], ell: f64, sf2: f64) -> f64 {
    let r = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let s = 5f64.sqrt() * r / ell;
    sf2 * (1.0 + s + 5.0 * r * r / (3.0 * ell * ell)) * (-s).exp()
}

/// Dense-inverse GP posterior `(mean, variance)` on standardized targets
/// (population standard deviation).
pub fn gp_posterior_oracle(xs: &[Vec<f64>], y: &[f64], q: &[f64], ell: f64, sf2: f64, sn2: f64) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / sd).collect();
    let k: Vec<Vec<f64>> = xs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            xs.iter()
                .enumerate()
                .map(|(j, b)| matern52_direct(a, b, ell, sf2) + if i == j { sn2 } else { 0.0 })
                .collect()
        })
        .collect();
    let kinv = naive_inverse(&k);
    let ks: Vec<f64> = xs.iter().map(|a| matern52_direct(a, q, ell, sf2)).collect();
    let w: Vec<f64> = kinv.iter().map(|r| r.iter().zip(&ks).map(|(a, b)| a * b).sum()).collect();
    let m = w.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let v = sf2 - w.iter().zip(&ks).map(|(a, b)| a * b).sum::<f64>();
    (m, v)
}

/// All exponent vectors over `n` variables with total degree `<= p`, by
/// exhaustive enumeration of `{0..=p}^n`.
pub fn brute_force_exponents(n: usize, p: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let total = (p + 1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut e = Vec::with_capacity(n);
        for _ in 0..n {
            e.push((c % (p + 1)) as u32);
            c /= p + 1;
        }
        if e.iter().sum::<u32>() as usize <= p {
            out.push(e);
        }
    }
    out
}

pub fn monomial(x: &[f64], e: &[u32]) -> f64 {
    x.iter().zip(e).map(|(v, &k)| v.powi(k as i32)).product()
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// k-NN by repeated selection of the nearest unused row (lower index wins
/// ties), summing targets in selection order.
pub fn knn_oracle(x: &Matrix, y: &[f64], q: &[f64], k: usize) -> f64 {
    let dist: Vec<f64> = x
        .iter_rows()
        .map(|r| r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    let mut used = vec![false; dist.len()];
    let mut sum = 0.0;
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..dist.len() {
            if !used[i] && best.is_none_or(|b| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        used[b] = true;
        sum += y[b];
    }
    sum / k as f64
}

/// MAPE, RMSE and STD straight from their definitions.
pub fn metrics_oracle(y: &[f64], yhat: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let e: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    let mape = y.iter().zip(&e).map(|(t, r)| (r / t).abs()).sum::<f64>() / n;
    let rmse = (e.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let ebar = e.iter().sum::<f64>() / n;
    let std = (e.iter().map(|r| (r - ebar).powi(2)).sum::<f64>() / n).sqrt();
    (mape, rmse, std)
}

/// Root mean squared error of predicting the training mean.
pub fn mean_predictor_rmse(train: &Dataset, test: &Dataset) -> f64 {
    let mean = train.targets().iter().sum::<f64>() / train.len() as f64;
    (test.targets().iter().map(|t| (t - mean).powi(2)).sum::<f64>() / test.len() as f64).sqrt()
}
