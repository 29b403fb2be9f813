//! Fully connected regressors parameterized by an [`ArchitectureSpec`],
//! trained with minibatch Adam.

mod dense;
mod model;
mod spec;
mod train;

pub use dense::{Dense, Init};
pub(crate) use dense::{flatten_grads, params_mut};
pub use model::{Gradients, MlpModel, MODEL_FORMAT_VERSION};
pub use spec::{
    Activation, ArchitectureSpec, Loss, BATCH_SIZES, HIDDEN_LAYERS_RANGE, LEAKY_RELU_SLOPE, LEARNING_RATE_RANGE,
    NEURONS_RANGE,
};
pub use train::{rmse, train, EpochRecord, TrainConfig, TrainHistory, TrainOutcome};
