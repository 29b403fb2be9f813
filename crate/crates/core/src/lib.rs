//! Surface-roughness regression driven by neural architecture search.
//!
//! The crate covers the whole pipeline: z-score normalization, VAE data
//! augmentation, polynomial feature expansion, Gaussian-process Bayesian
//! optimization over MLP architectures, two-stage (initial + refinement)
//! training, evaluation metrics and classical baselines.

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod gp;
pub mod mlp;
pub mod numerics;
pub mod pipeline;
pub mod vae;

pub use dataio::{Dataset, MetricsReport, NormStats};
pub use error::{Error, ErrorClass, Result, Stage};
pub use gp::{Acquisition, GpSurrogate, HedgeState, Strategy};
pub use mlp::{Activation, ArchitectureSpec, Loss, MlpModel, TrainConfig};
pub use numerics::{Matrix, Rng};
pub use pipeline::{PipelineArtifact, PipelineConfig};
pub use vae::{VaeModel, VaeTrainConfig};
