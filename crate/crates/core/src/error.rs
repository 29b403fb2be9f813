use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage names used to tag propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split,
    Normalize,
    Vae,
    FeatureAugment,
    Search,
    InitialTraining,
    Refinement,
    Evaluation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Split => "split",
            Stage::Normalize => "normalize",
            Stage::Vae => "vae-augment",
            Stage::FeatureAugment => "feature-augment",
            Stage::Search => "architecture-search",
            Stage::InitialTraining => "initial-training",
            Stage::Refinement => "refinement",
            Stage::Evaluation => "evaluation",
        };
        f.write_str(name)
    }
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("cholesky factorization failed at maximum jitter {jitter:e}; matrix is not positive definite")]
    NotPositiveDefinite { jitter: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("unknown target column {0:?}")]
    UnknownColumn(String),

    #[error("duplicate header name {0:?}")]
    DuplicateHeader(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("zero target value at row {0}; MAPE undefined")]
    ZeroTarget(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("all candidate architectures diverged")]
    AllCandidatesDiverged,

    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::NonNumeric { .. }
            | Error::UnknownColumn(_)
            | Error::DuplicateHeader(_)
            | Error::EmptyDataset(_)
            | Error::ZeroTarget(_)
            | Error::Version { .. }
            | Error::Schema(_)
            | Error::Dimension(_) => ErrorClass::Data,
            Error::NotSquare { .. }
            | Error::NotSymmetric(_)
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite(_)
            | Error::Diverged { .. }
            | Error::AllCandidatesDiverged => ErrorClass::Runtime,
            Error::Stage { source, .. } => source.class(),
        }
    }
}

/// Attaches a pipeline stage to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
