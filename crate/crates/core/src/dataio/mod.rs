//! Dataset ingestion, z-score normalization, splitting, polynomial feature
//! expansion and the evaluation metrics.

mod dataset;
mod metrics;
mod normalize;
mod poly;
mod synthetic;

pub use dataset::{load_csv, read_csv, split, Dataset};
pub use metrics::{compute_metrics, residual_mean, MetricsReport};
pub use normalize::{apply_normalizer, fit_normalizer, NormStats};
pub use poly::{poly_augment, poly_augment_dataset, poly_exponents, poly_feature_count, poly_feature_names};
pub use synthetic::synthetic_task;
