use serde::{Deserialize, Serialize};

use super::acquisition::{suggest, Acquisition, HedgeState, Strategy, DEFAULT_BETA};
use super::surrogate::GpSurrogate;
use crate::error::{Error, Result};
use crate::mlp::ArchitectureSpec;
use crate::numerics::{Matrix, Rng};

/// Settings of the sequential optimization loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Total number of objective evaluations, initial design included.
    pub budget: usize,
    pub n_initial: usize,
    pub strategy: Strategy,
    pub beta: f64,
    pub n_candidates: usize,
    pub hedge_eta: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 30,
            n_initial: 8,
            strategy: Strategy::GpHedge,
            beta: DEFAULT_BETA,
            n_candidates: 1024,
            hedge_eta: 1.0,
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("bo.budget must be >= 1".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::Config("bo.n_candidates must be >= 1".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("bo.beta must be finite and >= 0, got {}", self.beta)));
        }
        if !self.hedge_eta.is_finite() {
            return Err(Error::Config("bo.hedge_eta must be finite".into()));
        }
        Ok(())
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub spec: Option<ArchitectureSpec>,
    pub encoded_point: Vec<f64>,
    /// `None` when the evaluation produced no finite value.
    pub objective: Option<f64>,
    /// `"random"` for the initial design, otherwise the acquisition used.
    pub acquisition_kind: String,
    pub hedge_probs: Option<[f64; 3]>,
}

/// Point proposed by [`BayesOpt::ask`].
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: Vec<f64>,
    pub kind: Option<Acquisition>,
    pub hedge_probs: Option<[f64; 3]>,
}

/// What the objective reports back for a proposed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Point actually evaluated (e.g. snapped onto the discrete grid).
    pub point: Vec<f64>,
    pub value: f64,
    pub spec: Option<ArchitectureSpec>,
}

/// Ask/tell Bayesian optimizer over the unit cube.
#[derive(Debug, Clone)]
pub struct BayesOpt {
    cfg: BoConfig,
    dims: usize,
    rng: Rng,
    xs: Vec<Vec<f64>>,
    raw: Vec<f64>,
    hedge: HedgeState,
    surrogate: Option<GpSurrogate>,
    pending_nominees: Option<[Vec<f64>; 3]>,
    trace: Vec<TraceRecord>,
}

impl BayesOpt {
    pub fn new(dims: usize, cfg: BoConfig) -> Result<Self> {
        cfg.validate()?;
        if dims == 0 {
            return Err(Error::InvalidArgument("search space must have at least one dimension".into()));
        }
        Ok(Self {
            cfg,
            dims,
            rng: Rng::new(cfg.seed),
            xs: Vec::new(),
            raw: Vec::new(),
            hedge: HedgeState::new(cfg.hedge_eta),
            surrogate: None,
            pending_nominees: None,
            trace: Vec::new(),
        })
    }

    pub fn n_evaluated(&self) -> usize {
        self.xs.len()
    }

    pub fn is_done(&self) -> bool {
        self.xs.len() >= self.cfg.budget
    }

    pub fn hedge(&self) -> &HedgeState {
        &self.hedge
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    /// Best finite observation and its point.
    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.xs
            .iter()
            .zip(&self.raw)
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, v)| (x.as_slice(), *v))
    }

    /// Values fed to the surrogate: non-finite observations are replaced by
    /// the worst finite value seen (or 1.0 if there is none).
    fn surrogate_targets(&self) -> Vec<f64> {
        let worst = self.raw.iter().filter(|v| v.is_finite()).cloned().fold(f64::NEG_INFINITY, f64::max);
        let penalty = if worst.is_finite() { worst.max(1.0) } else { 1.0 };
        self.raw.iter().map(|v| if v.is_finite() { *v } else { penalty }).collect()
    }

    fn refit(&mut self) -> Result<()> {
        if self.xs.len() < 2 {
            self.surrogate = None;
            return Ok(());
        }
        let flat: Vec<f64> = self.xs.iter().flatten().cloned().collect();
        let x = Matrix::from_vec(self.xs.len(), self.dims, flat)?;
        self.surrogate = Some(GpSurrogate::fit(&x, &self.surrogate_targets())?);
        Ok(())
    }

    pub fn ask(&mut self) -> Result<Proposal> {
        let initial = self.xs.len() < self.cfg.n_initial.max(2);
        match (&self.surrogate, initial) {
            (Some(s), false) => {
                let sug = suggest(
                    s,
                    self.cfg.strategy,
                    &mut self.hedge,
                    &mut self.rng,
                    self.cfg.n_candidates,
                    self.cfg.beta,
                )?;
                self.pending_nominees = sug.nominees;
                Ok(Proposal {
                    point: sug.point,
                    kind: Some(sug.kind),
                    hedge_probs: sug.probs,
                })
            }
            _ => {
                self.pending_nominees = None;
                Ok(Proposal {
                    point: (0..self.dims).map(|_| self.rng.uniform()).collect(),
                    kind: None,
                    hedge_probs: None,
                })
            }
        }
    }

    /// Records an evaluation of the last proposal and refits the surrogate.
    pub fn tell(&mut self, proposal: &Proposal, eval: Evaluation) -> Result<()> {
        if eval.point.len() != self.dims {
            return Err(Error::Dimension(format!(
                "evaluated point has {} coordinates, expected {}",
                eval.point.len(),
                self.dims
            )));
        }
        self.trace.push(TraceRecord {
            iter: self.xs.len() + 1,
            spec: eval.spec,
            encoded_point: eval.point.clone(),
            objective: eval.value.is_finite().then_some(eval.value),
            acquisition_kind: proposal.kind.map_or("random".to_string(), |k| k.name().to_string()),
            hedge_probs: proposal.hedge_probs,
        });
        self.xs.push(eval.point);
        self.raw.push(eval.value);
        self.refit()?;
        if let (Some(nominees), Some(s)) = (self.pending_nominees.take(), &self.surrogate) {
            self.hedge.update(s, &nominees)?;
        }
        Ok(())
    }
}

/// Runs the full ask/evaluate/tell loop for `cfg.budget` evaluations.
///
/// Fails with [`Error::AllCandidatesDiverged`] when no evaluation produced a
/// finite value.
pub fn minimize<F>(dims: usize, cfg: BoConfig, mut objective: F) -> Result<BayesOpt>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let mut bo = BayesOpt::new(dims, cfg)?;
    while !bo.is_done() {
        let proposal = bo.ask()?;
        let eval = objective(&proposal.point)?;
        bo.tell(&proposal, eval)?;
    }
    if bo.best().is_none() {
        return Err(Error::AllCandidatesDiverged);
    }
    Ok(bo)
}
