use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Exponent vectors of every monomial of total degree `≤ p` in `n`
/// variables, in graded-lexicographic order:
/// `1, x1..xn, x1², x1x2, …, xn², …, xnᵖ`.
pub fn poly_exponents(n: usize, p: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(poly_feature_count(n, p));
    let mut frontier: Vec<(usize, Vec<u32>)> = vec![(0, vec![0; n])];
    out.push(vec![0; n]);
    for _ in 1..=p {
        let mut next = Vec::new();
        for (last, e) in &frontier {
            for j in *last..n {
                let mut e2 = e.clone();
                e2[j] += 1;
                next.push((j, e2));
            }
        }
        out.extend(next.iter().map(|(_, e)| e.clone()));
        frontier = next;
    }
    out
}

/// `C(n + p, p)`.
pub fn poly_feature_count(n: usize, p: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=p as u128 {
        c = c * (n as u128 + k) / k;
    }
    c as usize
}

/// Polynomial feature map of order `p`, constant term included.
pub fn poly_augment(x: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::InvalidArgument("polynomial order must be >= 1".into()));
    }
    let n = x.len();
    let mut out = Vec::with_capacity(poly_feature_count(n, p));
    out.push(1.0);
    // Each frontier term remembers the highest variable index it contains so
    // that extending with x_j, j >= last, enumerates each monomial once.
    let mut frontier: Vec<(usize, f64)> = vec![(0, 1.0)];
    for _ in 1..=p {
        let mut next = Vec::with_capacity(frontier.len() * n);
        for &(last, v) in &frontier {
            for (j, &xj) in x.iter().enumerate().skip(last) {
                next.push((j, v * xj));
            }
        }
        out.extend(next.iter().map(|t| t.1));
        frontier = next;
    }
    Ok(out)
}

/// Human-readable names (`1`, `a`, `a*b`, `a^2`, …) matching [`poly_augment`]'s order.
pub fn poly_feature_names(names: &[String], p: usize) -> Vec<String> {
    poly_exponents(names.len(), p)
        .into_iter()
        .map(|e| {
            let parts: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(j, &k)| if k == 1 { names[j].clone() } else { format!("{}^{k}", names[j]) })
                .collect();
            if parts.is_empty() {
                "1".to_string()
            } else {
                parts.join("*")
            }
        })
        .collect()
}

pub fn poly_augment_dataset(d: &Dataset, p: usize) -> Result<Dataset> {
    if p == 0 {
        return Err(Error::InvalidArgument("polynomial order must be >= 1".into()));
    }
    let width = poly_feature_count(d.n_features(), p);
    let features: Matrix = d
        .features()
        .map_rows(width, |r| poly_augment(r, p).expect("order checked above"));
    d.with_features(poly_feature_names(d.feature_names(), p), features)
}
