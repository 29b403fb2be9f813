//! Classical regressors used as comparison points: least squares, ridge,
//! LASSO, elastic net, k-nearest neighbours and GP regression.
//!
//! The penalized objectives use the per-sample scaling
//! `(1/N)‖y − Xw − b‖² + αλ‖w‖₁ + (1−α)λ‖w‖²`; ridge is the `α = 0` case
//! and LASSO the `α = 1` case. The intercept `b` is never penalized.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpHyper, GpSurrogate};
use crate::numerics::{cholesky_factor, Matrix};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_K: usize = 5;

const CD_TOL: f64 = 1e-8;
const CD_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    None,
    L2 { lambda: f64 },
    L1 { lambda: f64 },
    Elastic { lambda: f64, alpha: f64 },
}

impl Penalty {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Penalty::None => true,
            Penalty::L2 { lambda } | Penalty::L1 { lambda } => lambda >= 0.0 && lambda.is_finite(),
            Penalty::Elastic { lambda, alpha } => {
                lambda >= 0.0 && lambda.is_finite() && (0.0..=1.0).contains(&alpha)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid penalty {self:?}")))
        }
    }

    /// `(λ, α)` in the elastic-net parameterization.
    fn lambda_alpha(&self) -> (f64, f64) {
        match *self {
            Penalty::None => (0.0, 0.0),
            Penalty::L2 { lambda } => (lambda, 0.0),
            Penalty::L1 { lambda } => (lambda, 1.0),
            Penalty::Elastic { lambda, alpha } => (lambda, alpha),
        }
    }
}

/// Linear model; `weights` holds the coefficients followed by the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub penalty: Penalty,
    /// Diagonal jitter needed by the normal-equation solve.
    pub jitter: f64,
    /// Coordinate-descent sweeps run (0 for the closed-form fits).
    pub sweeps: usize,
    /// Objective value after each coordinate-descent sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.weights[..self.n_features()]
    }

    pub fn intercept(&self) -> f64 {
        self.weights[self.n_features()]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!("expected {} features, got {}", self.n_features(), x.len())));
        }
        Ok(self.intercept() + x.iter().zip(self.coefficients()).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

/// Penalized objective evaluated at `w` (coefficients then intercept).
pub fn linear_objective(x: &Matrix, y: &[f64], w: &[f64], penalty: &Penalty) -> f64 {
    let p = x.cols();
    let n = y.len() as f64;
    let sse: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, t)| {
            let pred = w[p] + r.iter().zip(&w[..p]).map(|(a, b)| a * b).sum::<f64>();
            (t - pred).powi(2)
        })
        .sum();
    let (lambda, alpha) = penalty.lambda_alpha();
    let l1: f64 = w[..p].iter().map(|v| v.abs()).sum();
    let l2: f64 = w[..p].iter().map(|v| v * v).sum();
    sse / n + alpha * lambda * l1 + (1.0 - alpha) * lambda * l2
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("baseline training data".into()));
    }
    Ok(())
}

pub fn fit_linear(x: &Matrix, y: &[f64], penalty: Penalty) -> Result<LinearModel> {
    check_xy(x, y)?;
    penalty.validate()?;
    match penalty {
        Penalty::None => normal_equations(x, y, 0.0, penalty),
        Penalty::L2 { lambda } => normal_equations(x, y, lambda, penalty),
        Penalty::L1 { .. } | Penalty::Elastic { .. } => Ok(coordinate_descent(x, y, penalty)),
    }
}

/// Solves `(XᵀX + N·λ·D) w = Xᵀy` over `[X, 1]`, `D` = identity without the
/// intercept entry.
fn normal_equations(x: &Matrix, y: &[f64], lambda: f64, penalty: Penalty) -> Result<LinearModel> {
    let (n, p) = x.shape();
    let mut a = Matrix::zeros(p + 1, p + 1);
    let mut rhs = vec![0.0; p + 1];
    let mut aug = vec![1.0; p + 1];
    for (r, t) in x.iter_rows().zip(y) {
        aug[..p].copy_from_slice(r);
        for i in 0..=p {
            rhs[i] += aug[i] * t;
            for j in 0..=i {
                a[(i, j)] += aug[i] * aug[j];
            }
        }
    }
    for i in 0..=p {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    for i in 0..p {
        a[(i, i)] += n as f64 * lambda;
    }
    let chol = cholesky_factor(&a, 0.0)?;
    Ok(LinearModel {
        weights: chol.solve_vec(&rhs)?,
        penalty,
        jitter: chol.jitter,
        sweeps: 0,
        objective_trace: Vec::new(),
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent: coefficients in order, then the intercept.
fn coordinate_descent(x: &Matrix, y: &[f64], penalty: Penalty) -> LinearModel {
    let (n, p) = x.shape();
    let nf = n as f64;
    let (lambda, alpha) = penalty.lambda_alpha();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.col_values(j)).collect();
    let z: Vec<f64> = cols.iter().map(|c| 2.0 / nf * c.iter().map(|v| v * v).sum::<f64>()).collect();

    let mut w = vec![0.0; p];
    let mut b = y.iter().sum::<f64>() / nf;
    let mut r: Vec<f64> = y.iter().map(|t| t - b).collect();
    let mut trace = Vec::new();
    let mut sweeps = 0;

    while sweeps < CD_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let denom = z[j] + 2.0 * (1.0 - alpha) * lambda;
            let old = w[j];
            let new = if denom > 0.0 {
                let rho = 2.0 / nf * cols[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() + z[j] * old;
                soft_threshold(rho, alpha * lambda) / denom
            } else {
                0.0
            };
            if new != old {
                let d = new - old;
                for (ri, xi) in r.iter_mut().zip(&cols[j]) {
                    *ri -= xi * d;
                }
                w[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        let shift = r.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            b += shift;
            r.iter_mut().for_each(|v| *v -= shift);
            max_change = max_change.max(shift.abs());
        }
        let mut full = w.clone();
        full.push(b);
        trace.push(linear_objective(x, y, &full, &penalty));
        if max_change < CD_TOL {
            break;
        }
    }
    w.push(b);
    LinearModel {
        weights: w,
        penalty,
        jitter: 0.0,
        sweeps,
        objective_trace: trace,
    }
}

/// Smallest `λ` for which LASSO sets every coefficient to zero.
pub fn lasso_lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (0..x.cols())
        .map(|j| (2.0 / n * x.iter_rows().zip(y).map(|(r, t)| r[j] * (t - mean)).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// Mean target of the `k` nearest training rows (Euclidean distance, ties
/// to the lower row index).
pub fn knn_predict(x: &Matrix, y: &[f64], query: &[f64], k: usize) -> Result<f64> {
    check_xy(x, y)?;
    if k == 0 || k > x.rows() {
        return Err(Error::InvalidArgument(format!("k must be in 1..={}, got {k}", x.rows())));
    }
    if query.len() != x.cols() {
        return Err(Error::Dimension(format!("query has {} features, expected {}", query.len(), x.cols())));
    }
    let mut d: Vec<(f64, usize)> = x
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(d[..k].iter().map(|(_, i)| y[*i]).sum::<f64>() / k as f64)
}

/// GP regression on feature vectors. Without `hyper` the marginal-likelihood
/// grid picks the kernel. Returns predictive means and latent variances.
pub fn gpr_fit_predict(
    x: &Matrix,
    y: &[f64],
    test: &Matrix,
    hyper: Option<GpHyper>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_xy(x, y)?;
    let gp = match hyper {
        Some(h) => GpSurrogate::fit_with(x, y, h)?,
        None => GpSurrogate::fit(x, y)?,
    };
    let mut means = Vec::with_capacity(test.rows());
    let mut vars = Vec::with_capacity(test.rows());
    for r in test.iter_rows() {
        let (m, v) = gp.posterior(r)?;
        means.push(m);
        vars.push(v);
    }
    Ok((means, vars))
}

/// Baseline families selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Linear,
    Ridge,
    Lasso,
    ElasticNet,
    Knn,
    Gpr,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Linear,
        BaselineKind::Ridge,
        BaselineKind::Lasso,
        BaselineKind::ElasticNet,
        BaselineKind::Knn,
        BaselineKind::Gpr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Linear => "linear",
            BaselineKind::Ridge => "ridge",
            BaselineKind::Lasso => "lasso",
            BaselineKind::ElasticNet => "elastic_net",
            BaselineKind::Knn => "knn",
            BaselineKind::Gpr => "gpr",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" | "lr" => Ok(BaselineKind::Linear),
            "ridge" | "rr" => Ok(BaselineKind::Ridge),
            "lasso" => Ok(BaselineKind::Lasso),
            "elastic_net" | "elastic" | "enr" => Ok(BaselineKind::ElasticNet),
            "knn" => Ok(BaselineKind::Knn),
            "gpr" => Ok(BaselineKind::Gpr),
            _ => Err(Error::Config(format!(
                "unknown baseline '{s}' (expected linear, ridge, lasso, elastic_net, knn or gpr)"
            ))),
        }
    }
}

/// Tunables shared by the baseline families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub lambda: f64,
    pub alpha: f64,
    pub k: usize,
    pub gp_hyper: Option<GpHyper>,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_K,
            gp_hyper: None,
        }
    }
}

/// Fits `kind` on the training rows and predicts the test rows.
pub fn fit_predict(kind: BaselineKind, params: &BaselineParams, x: &Matrix, y: &[f64], test: &Matrix) -> Result<Vec<f64>> {
    if test.cols() != x.cols() {
        return Err(Error::Dimension(format!("test has {} features, train has {}", test.cols(), x.cols())));
    }
    let linear = |penalty| fit_linear(x, y, penalty)?.predict_batch(test);
    match kind {
        BaselineKind::Linear => linear(Penalty::None),
        BaselineKind::Ridge => linear(Penalty::L2 { lambda: params.lambda }),
        BaselineKind::Lasso => linear(Penalty::L1 { lambda: params.lambda }),
        BaselineKind::ElasticNet => linear(Penalty::Elastic {
            lambda: params.lambda,
            alpha: params.alpha,
        }),
        BaselineKind::Knn => {
            let k = params.k.min(x.rows());
            test.iter_rows().map(|q| knn_predict(x, y, q, k)).collect()
        }
        BaselineKind::Gpr => Ok(gpr_fit_predict(x, y, test, params.gp_hyper)?.0),
    }
}
