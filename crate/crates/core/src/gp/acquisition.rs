use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use libm::erfc;

use super::surrogate::GpSurrogate;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Default exploration weight for LCB.
pub const DEFAULT_BETA: f64 = 1.96;

const PERTURB_SD: f64 = 0.05;

/// Base acquisition functions, all in the minimization convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Acquisition {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "LCB")]
    Lcb,
}

impl Acquisition {
    /// Portfolio order used by [`HedgeState`].
    pub const ALL: [Acquisition; 3] = [Acquisition::Ei, Acquisition::Pi, Acquisition::Lcb];

    pub fn name(self) -> &'static str {
        match self {
            Acquisition::Ei => "EI",
            Acquisition::Pi => "PI",
            Acquisition::Lcb => "LCB",
        }
    }
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Acquisition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EI" => Ok(Acquisition::Ei),
            "PI" => Ok(Acquisition::Pi),
            "LCB" => Ok(Acquisition::Lcb),
            _ => Err(Error::Config(format!("unknown acquisition '{s}' (expected EI, PI or LCB)"))),
        }
    }
}

/// Search strategy: one fixed acquisition or the hedged portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "LCB")]
    Lcb,
    #[default]
    #[serde(rename = "GP_HEDGE")]
    GpHedge,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ei => "EI",
            Strategy::Pi => "PI",
            Strategy::Lcb => "LCB",
            Strategy::GpHedge => "GP_HEDGE",
        }
    }

    pub fn base(self) -> Option<Acquisition> {
        match self {
            Strategy::Ei => Some(Acquisition::Ei),
            Strategy::Pi => Some(Acquisition::Pi),
            Strategy::Lcb => Some(Acquisition::Lcb),
            Strategy::GpHedge => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "GP_HEDGE" | "HEDGE" => Ok(Strategy::GpHedge),
            other => other.parse::<Acquisition>().map(|a| match a {
                Acquisition::Ei => Strategy::Ei,
                Acquisition::Pi => Strategy::Pi,
                Acquisition::Lcb => Strategy::Lcb,
            }),
        }
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Score to maximize given a posterior mean and standard deviation.
pub fn acquisition_from_moments(mean: f64, sd: f64, kind: Acquisition, best: f64, beta: f64) -> f64 {
    let improvement = best - mean;
    match kind {
        Acquisition::Ei => {
            if sd <= 0.0 {
                return improvement.max(0.0);
            }
            let z = improvement / sd;
            improvement * normal_cdf(z) + sd * normal_pdf(z)
        }
        Acquisition::Pi => {
            if sd <= 0.0 {
                return if improvement > 0.0 { 1.0 } else { 0.0 };
            }
            normal_cdf(improvement / sd)
        }
        Acquisition::Lcb => -(mean - beta * sd),
    }
}

/// Acquisition score of `a` under the fitted surrogate, in objective units.
pub fn acquisition(s: &GpSurrogate, a: &[f64], kind: Acquisition, best: f64, beta: f64) -> Result<f64> {
    if !best.is_finite() {
        return Err(Error::InvalidArgument(format!("incumbent must be finite, got {best}")));
    }
    let (m, v) = s.posterior(a)?;
    Ok(acquisition_from_moments(m, v.sqrt(), kind, best, beta))
}

/// Cumulative rewards of the three base acquisitions (EI, PI, LCB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    pub gains: [f64; 3],
    pub eta: f64,
}

impl Default for HedgeState {
    fn default() -> Self {
        Self {
            gains: [0.0; 3],
            eta: 1.0,
        }
    }
}

impl HedgeState {
    pub fn new(eta: f64) -> Self {
        Self {
            gains: [0.0; 3],
            eta,
        }
    }

    /// Softmax of `eta · gains`.
    pub fn probabilities(&self) -> [f64; 3] {
        let scaled = self.gains.map(|g| self.eta * g);
        let top = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = scaled.map(|s| (s - top).exp());
        let total: f64 = w.iter().sum();
        w.map(|v| v / total)
    }

    /// Rewards each acquisition with the negated standardized posterior
    /// mean at its nominee under the refitted surrogate.
    pub fn update(&mut self, s: &GpSurrogate, nominees: &[Vec<f64>; 3]) -> Result<()> {
        for (g, p) in self.gains.iter_mut().zip(nominees) {
            *g -= s.posterior_standardized(p)?.0;
        }
        Ok(())
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        let p = self.probabilities();
        let u = rng.uniform();
        let mut acc = 0.0;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                return k;
            }
        }
        2
    }
}

/// Outcome of one acquisition step.
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub point: Vec<f64>,
    pub kind: Acquisition,
    /// Each base acquisition's argmax (GP_HEDGE only).
    pub nominees: Option<[Vec<f64>; 3]>,
    /// Selection probabilities used for the draw (GP_HEDGE only).
    pub probs: Option<[f64; 3]>,
}

fn candidates(s: &GpSurrogate, rng: &mut Rng, n_candidates: usize) -> Matrix {
    let d = s.dims();
    let mut data = Vec::with_capacity((n_candidates + s.n_points()) * d);
    for _ in 0..n_candidates * d {
        data.push(rng.uniform());
    }
    for row in s.points().iter_rows() {
        for v in row {
            data.push((v + PERTURB_SD * rng.standard_normal()).clamp(0.0, 1.0));
        }
    }
    let n = data.len() / d;
    Matrix::from_vec(n, d, data).expect("rectangular")
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Maximizes the acquisition over seeded random candidates.
///
/// The incumbent is the smallest observation seen by the surrogate.
pub fn suggest(
    s: &GpSurrogate,
    strategy: Strategy,
    hedge: &mut HedgeState,
    rng: &mut Rng,
    n_candidates: usize,
    beta: f64,
) -> Result<Suggestion> {
    let cand = candidates(s, rng, n_candidates);
    if cand.rows() == 0 {
        return Err(Error::InvalidArgument("no candidate points".into()));
    }
    let best = s
        .standardized_targets()
        .iter()
        .map(|z| s.target_mean() + s.target_scale() * z)
        .fold(f64::INFINITY, f64::min);
    let moments: Vec<(f64, f64)> = cand
        .iter_rows()
        .map(|r| s.posterior(r).map(|(m, v)| (m, v.sqrt())))
        .collect::<Result<_>>()?;
    let nominate = |kind: Acquisition| {
        let scores: Vec<f64> =
            moments.iter().map(|(m, sd)| acquisition_from_moments(*m, *sd, kind, best, beta)).collect();
        cand.row(argmax(&scores)).to_vec()
    };
    match strategy.base() {
        Some(kind) => Ok(Suggestion {
            point: nominate(kind),
            kind,
            nominees: None,
            probs: None,
        }),
        None => {
            let nominees = Acquisition::ALL.map(nominate);
            let probs = hedge.probabilities();
            let k = hedge.draw(rng);
            Ok(Suggestion {
                point: nominees[k].clone(),
                kind: Acquisition::ALL[k],
                nominees: Some(nominees),
                probs: Some(probs),
            })
        }
    }
}
