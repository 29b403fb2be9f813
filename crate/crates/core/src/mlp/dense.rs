use serde::{Deserialize, Serialize};

use crate::numerics::{multiversion, Matrix, Rng};

/// Fully connected layer `out = b + x·W` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Weight initialization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// He-uniform, limit `√(6/fan_in)`.
    He,
    /// Xavier-uniform, limit `√(6/(fan_in+fan_out))`.
    Xavier,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            w: Matrix::zeros(n_in, n_out),
            b: vec![0.0; n_out],
        }
    }

    pub fn init(n_in: usize, n_out: usize, init: Init, rng: &mut Rng) -> Self {
        let limit = match init {
            Init::He => (6.0 / n_in as f64).sqrt(),
            Init::Xavier => (6.0 / (n_in + n_out) as f64).sqrt(),
        };
        let mut layer = Self::zeros(n_in, n_out);
        for v in layer.w.as_mut_slice() {
            *v = rng.uniform_range(-limit, limit);
        }
        layer
    }

    #[inline]
    pub fn n_in(&self) -> usize {
        self.w.rows()
    }

    #[inline]
    pub fn n_out(&self) -> usize {
        self.w.cols()
    }

    /// Writes the pre-activation for input `x` into `out`.
    ///
    /// Each output accumulates over inputs in index order, starting from the
    /// bias; the batched variants keep that order.
    #[inline]
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in());
        affine_row(x, self.w.as_slice(), &self.b, out);
    }

    /// Accumulates parameter gradients for one sample and writes the
    /// gradient with respect to the layer input into `d_in`.
    #[inline]
    pub fn backward_into(&self, x: &[f64], d_out: &[f64], grad: &mut Dense, d_in: Option<&mut [f64]>) {
        self.backward_rows_into(x, d_out, 1, grad, d_in);
    }

    /// Pre-activations for `n` row-major input rows, bit-identical to
    /// [`forward_into`](Self::forward_into) per row.
    #[inline]
    pub fn forward_rows_into(&self, x: &[f64], n: usize, out: &mut [f64]) {
        let (ni, no) = (self.n_in(), self.n_out());
        debug_assert_eq!(x.len(), n * ni);
        debug_assert_eq!(out.len(), n * no);
        forward_rows(x, ni, self.w.as_slice(), &self.b, out);
    }

    /// Batched [`backward_into`](Self::backward_into) over `n` rows; each
    /// gradient entry accumulates over rows in order.
    #[inline]
    pub fn backward_rows_into(&self, x: &[f64], d_out: &[f64], n: usize, grad: &mut Dense, d_in: Option<&mut [f64]>) {
        let (ni, no) = (self.n_in(), self.n_out());
        debug_assert_eq!(x.len(), n * ni);
        debug_assert_eq!(d_out.len(), n * no);
        backward_rows(x, ni, d_out, self.w.as_slice(), grad, d_in);
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.w.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        self.b.iter_mut().for_each(|v| *v *= s);
    }

    pub fn param_count(&self) -> usize {
        self.w.as_slice().len() + self.b.len()
    }
}

/// Flattened `[w, b]` views for an optimizer.
pub(crate) fn params_mut(layers: &mut [Dense]) -> Vec<&mut [f64]> {
    let mut out = Vec::with_capacity(layers.len() * 2);
    for l in layers {
        out.push(l.w.as_mut_slice());
        out.push(l.b.as_mut_slice());
    }
    out
}

/// `[w, b]` views in the order used by [`params_mut`].
pub(crate) fn flatten_grads(layers: &[Dense]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(layers.len() * 2);
    for l in layers {
        out.push(l.w.as_slice());
        out.push(l.b.as_slice());
    }
    out
}

const LANES: usize = 8;

/// Batches at least this large compute the input gradient through a
/// transposed weight copy.
const TRANSPOSE_MIN_ROWS: usize = 8;

multiversion!(fn forward_rows => forward_rows_kernel(x: &[f64], ni: usize, w: &[f64], b: &[f64], out: &mut [f64]));
multiversion!(fn backward_rows => backward_rows_kernel(
    x: &[f64],
    ni: usize,
    d_out: &[f64],
    w: &[f64],
    grad: &mut Dense,
    d_in: Option<&mut [f64]>,
));

#[inline(always)]
fn forward_rows_kernel(x: &[f64], ni: usize, w: &[f64], b: &[f64], out: &mut [f64]) {
    for (xr, o) in x.chunks_exact(ni).zip(out.chunks_exact_mut(b.len())) {
        affine_row(xr, w, b, o);
    }
}

#[inline(always)]
fn backward_rows_kernel(x: &[f64], ni: usize, d_out: &[f64], w: &[f64], grad: &mut Dense, d_in: Option<&mut [f64]>) {
    let no = grad.b.len();
    for d in d_out.chunks_exact(no) {
        for (g, &v) in grad.b.iter_mut().zip(d) {
            *g += v;
        }
    }
    for (i, gr) in grad.w.as_mut_slice().chunks_exact_mut(no).enumerate() {
        outer_accumulate(x, ni, i, d_out, gr);
    }
    let Some(d_in) = d_in else { return };
    if d_out.len() < TRANSPOSE_MIN_ROWS * no {
        for (di, d) in d_in.chunks_exact_mut(ni).zip(d_out.chunks_exact(no)) {
            for (v, wr) in di.iter_mut().zip(w.chunks_exact(no)) {
                *v = dot_inline(wr, d);
            }
        }
        return;
    }
    // Several rows: multiply by a transposed copy so the input gradient
    // reuses the register-blocked forward kernel.
    let mut wt = vec![0.0; ni * no];
    for (i, wr) in w.chunks_exact(no).enumerate() {
        for (j, &v) in wr.iter().enumerate() {
            wt[j * ni + i] = v;
        }
    }
    let zeros = vec![0.0; ni];
    for (di, d) in d_in.chunks_exact_mut(ni).zip(d_out.chunks_exact(no)) {
        affine_row(d, &wt, &zeros, di);
    }
}

/// `out = b + x·W` for one row; `W` is `x.len() × b.len()` row-major. Outputs
/// are processed in register blocks of `LANES`, each summed over `i` in order.
#[inline(always)]
fn affine_row(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let no = b.len();
    let mut j = 0;
    while j + LANES <= no {
        let mut acc = [0.0; LANES];
        acc.copy_from_slice(&b[j..j + LANES]);
        for (wr, &xi) in w[j..].chunks(no).zip(x) {
            let wr: &[f64; LANES] = wr[..LANES].try_into().expect("block within row");
            for l in 0..LANES {
                acc[l] += xi * wr[l];
            }
        }
        out[j..j + LANES].copy_from_slice(&acc);
        j += LANES;
    }
    for (jj, o) in out.iter_mut().enumerate().skip(j) {
        let mut acc = b[jj];
        for (wr, &xi) in w[jj..].chunks(no).zip(x) {
            acc += xi * wr[0];
        }
        *o = acc;
    }
}

/// `g += Σ_b x[b][i]·d[b]` over rows in order, with `x` `n × ni` and `d`
/// `n × g.len()`.
#[inline(always)]
fn outer_accumulate(x: &[f64], ni: usize, i: usize, d: &[f64], g: &mut [f64]) {
    let no = g.len();
    let mut j = 0;
    while j + LANES <= no {
        let mut acc = [0.0; LANES];
        acc.copy_from_slice(&g[j..j + LANES]);
        for (dr, xr) in d[j..].chunks(no).zip(x.chunks_exact(ni)) {
            let dr: &[f64; LANES] = dr[..LANES].try_into().expect("block within row");
            let xi = xr[i];
            for l in 0..LANES {
                acc[l] += xi * dr[l];
            }
        }
        g[j..j + LANES].copy_from_slice(&acc);
        j += LANES;
    }
    for (jj, gv) in g.iter_mut().enumerate().skip(j) {
        let mut acc = *gv;
        for (dr, xr) in d[jj..].chunks(no).zip(x.chunks_exact(ni)) {
            acc += xr[i] * dr[0];
        }
        *gv = acc;
    }
}

/// Dot product with eight independent partial sums.
#[inline(always)]
fn dot_inline(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_matrix_product() {
        let layer = Dense {
            w: Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap(),
            b: vec![0.5, -0.5],
        };
        let mut out = [0.0; 2];
        layer.forward_into(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [1.0 - 5.0 + 0.5, 2.0 - 6.0 - 0.5]);
    }

    #[test]
    fn init_within_limits() {
        let mut rng = Rng::new(3);
        let l = Dense::init(24, 10, Init::He, &mut rng);
        let lim = (6.0f64 / 24.0).sqrt();
        assert!(l.w.as_slice().iter().all(|v| v.abs() <= lim));
        assert!(l.b.iter().all(|v| *v == 0.0));
        let x = Dense::init(24, 10, Init::Xavier, &mut rng);
        let lim = (6.0f64 / 34.0).sqrt();
        assert!(x.w.as_slice().iter().all(|v| v.abs() <= lim));
    }
}
