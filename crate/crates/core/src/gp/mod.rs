//! Gaussian-process surrogate over the encoded architecture space, the
//! EI/PI/LCB acquisitions, the GP-Hedge portfolio and the sequential
//! Bayesian-optimization loop.

mod acquisition;
mod bo;
mod kernel;
mod space;
mod surrogate;

pub use acquisition::{
    acquisition, acquisition_from_moments, normal_cdf, normal_pdf, suggest, Acquisition, HedgeState, Strategy,
    Suggestion,
};
pub use bo::{minimize, BayesOpt, BoConfig, Evaluation, Proposal, TraceRecord};
pub use kernel::{kernel_eval, matern52, GpHyper};
pub use space::{SpaceEncoding, SPACE_DIMS};
pub use surrogate::{hyper_grid, log_marginal_likelihood, GpSurrogate, MIN_NOISE};
