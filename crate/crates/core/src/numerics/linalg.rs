use super::Matrix;
use crate::error::{Error, Result};

/// Largest diagonal jitter tried before a factorization is declared failed.
pub const MAX_JITTER: f64 = 1e-2;

/// First jitter tried when the caller asked for none and the plain factorization failed.
const FIRST_JITTER: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor together with the jitter that was
/// actually added to the diagonal.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub l: Matrix,
    pub jitter: f64,
}

impl Cholesky {
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        cholesky_solve(&self.l, b)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        cholesky_solve_vec(&self.l, b)
    }

    /// Solves `L x = b` only (forward substitution).
    pub fn forward(&self, b: &[f64]) -> Result<Vec<f64>> {
        forward_substitute(&self.l, b)
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.rows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// Factors `a + jitter·I = L·Lᵀ`.
///
/// On failure the jitter is raised tenfold (starting from 1e-10 when zero)
/// until [`MAX_JITTER`]; the jitter that succeeded is reported.
pub fn cholesky_factor(a: &Matrix, jitter: f64) -> Result<Cholesky> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {jitter}")));
    }
    let scale = a
        .as_slice()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut asym = 0.0_f64;
    for i in 0..rows {
        for j in 0..i {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs() / scale);
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    let mut current = jitter;
    loop {
        if let Some(l) = try_factor(a, current) {
            return Ok(Cholesky { l, jitter: current });
        }
        let next = if current == 0.0 {
            FIRST_JITTER
        } else {
            current * 10.0
        };
        if current >= MAX_JITTER || next > MAX_JITTER * (1.0 + 1e-12) {
            return Err(Error::NotPositiveDefinite { jitter: current });
        }
        current = next;
    }
}

fn try_factor(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

fn forward_substitute(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, factor has {n}",
            b.len()
        )));
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (b[i] - s) / row[i];
    }
    Ok(y)
}

fn backward_substitute_transposed(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `(L·Lᵀ) x = b` for a single right-hand side.
pub fn cholesky_solve_vec(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if l.rows() != l.cols() {
        return Err(Error::NotSquare {
            rows: l.rows(),
            cols: l.cols(),
        });
    }
    let y = forward_substitute(l, b)?;
    Ok(backward_substitute_transposed(l, &y))
}

/// Solves `(L·Lᵀ) X = B` column by column.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    if l.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, factor has {}",
            b.rows(),
            l.rows()
        )));
    }
    let mut x = Matrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let col = cholesky_solve_vec(l, &b.col_values(j))?;
        for (i, v) in col.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}
