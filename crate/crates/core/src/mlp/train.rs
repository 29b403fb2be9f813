use serde::{Deserialize, Serialize};

use super::dense::{flatten_grads, params_mut};
use super::model::{MlpModel, Workspace};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Keep the parameters with the lowest validation RMSE seen, the
    /// untrained starting point included.
    pub early_best: bool,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            early_best: true,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_val_rmse: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 means the starting parameters were kept.
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub optimizer_steps: u64,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: TrainHistory,
}

/// Root-mean-square error of the model on a dataset (normalized units).
pub fn rmse(model: &MlpModel, d: &Dataset) -> Result<f64> {
    let pred = model.forward_batch(d.features())?;
    let n = d.len() as f64;
    Ok((pred.iter().zip(d.targets()).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n).sqrt())
}

/// Minibatch Adam with the spec's batch size, learning rate and loss.
///
/// Divergence after the first epoch stops training and returns the best
/// checkpoint so far with `diverged_at` set; divergence in the first
/// epoch is an error.
pub fn train(model: MlpModel, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be >= 1".into()));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset("training and validation sets must be non-empty".into()));
    }
    if train.n_features() != model.input_width() || val.n_features() != model.input_width() {
        return Err(Error::Dimension(format!(
            "model expects {} inputs, data has {}/{}",
            model.input_width(),
            train.n_features(),
            val.n_features()
        )));
    }

    let spec = *model.spec();
    let mut rng = Rng::new(cfg.seed);
    let mut adam = Adam::new(spec.learning_rate, cfg.adam);
    let mut ws = Workspace::new(&model, spec.batch_size);
    let mut grads = model.zero_gradients();
    let x = train.features();
    let y = train.targets();

    let initial_val_rmse = rmse(&model, val)?;
    let mut best_val = if initial_val_rmse.is_finite() {
        initial_val_rmse
    } else {
        f64::INFINITY
    };
    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut model = model;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut diverged_at = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    'epochs: for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(spec.batch_size) {
            grads.zero();
            let loss = model.accumulate(x, y, batch, spec.loss, &mut ws, &mut grads);
            if !loss.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut params_mut(model.layers_mut()), &flatten_grads(&grads.layers));
        }
        let val_rmse = rmse(&model, val)?;
        if !val_rmse.is_finite() {
            diverged_at = Some(epoch);
            break;
        }
        records.push(EpochRecord {
            train_loss: loss_sum / train.len() as f64,
            val_rmse,
        });
        if val_rmse < best_val {
            best_val = val_rmse;
            best_epoch = epoch;
            if cfg.early_best {
                best_model = model.clone();
            }
        }
    }

    if diverged_at == Some(1) || (diverged_at.is_some() && !best_val.is_finite()) {
        return Err(Error::Diverged {
            epoch: diverged_at.unwrap_or(1),
        });
    }
    let final_model = if cfg.early_best || diverged_at.is_some() {
        best_model
    } else {
        model
    };
    Ok(TrainOutcome {
        model: final_model,
        history: TrainHistory {
            initial_val_rmse,
            epochs: records,
            best_epoch,
            best_val_rmse: best_val,
            optimizer_steps: adam.steps(),
            diverged_at,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Activation, ArchitectureSpec, Loss};
    use crate::numerics::Matrix;

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let ys = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        Dataset::from_xy(Matrix::from_vec(n, 1, xs).unwrap(), ys).unwrap()
    }

    fn spec(act: Activation, batch: usize, lr: f64) -> ArchitectureSpec {
        ArchitectureSpec {
            hidden_layers: 1,
            neurons_per_layer: 10,
            activation: act,
            batch_size: batch,
            learning_rate: lr,
            loss: Loss::L2,
        }
    }

    #[test]
    fn one_epoch_step_count() {
        let d = linear_data(37, 1);
        let m = MlpModel::build(spec(Activation::Relu, 8, 0.01), 1, &mut Rng::new(1)).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let out = train(m, &d, &d, &cfg).unwrap();
        assert_eq!(out.history.optimizer_steps, 5);
        assert_eq!(out.history.epochs.len(), 1);
    }

    #[test]
    fn recovers_linear_function() {
        let d = linear_data(200, 2);
        let val = linear_data(50, 3);
        let m = MlpModel::build(spec(Activation::Identity, 16, 0.01), 1, &mut Rng::new(4)).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            seed: 5,
            ..Default::default()
        };
        let out = train(m, &d, &val, &cfg).unwrap();
        let y = val.targets();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        let r = rmse(&out.model, &val).unwrap();
        assert!(r < 0.05 * std, "rmse {r} std {std}");
    }

    #[test]
    fn training_is_deterministic() {
        let d = linear_data(40, 1);
        let cfg = TrainConfig {
            epochs: 5,
            seed: 3,
            ..Default::default()
        };
        let run = || {
            let m = MlpModel::build(spec(Activation::Tanh, 4, 0.01), 1, &mut Rng::new(2)).unwrap();
            train(m, &d, &d, &cfg).unwrap().model
        };
        assert_eq!(run().parameter_bytes(), run().parameter_bytes());
    }

    #[test]
    fn best_checkpoint_never_worse_than_first_epoch() {
        let d = linear_data(60, 8);
        let val = linear_data(20, 9);
        let m = MlpModel::build(spec(Activation::Sigmoid, 4, 0.05), 1, &mut Rng::new(2)).unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            ..Default::default()
        };
        let out = train(m, &d, &val, &cfg).unwrap();
        let final_rmse = rmse(&out.model, &val).unwrap();
        assert!(final_rmse <= out.history.epochs[0].val_rmse);
        assert!((final_rmse - out.history.best_val_rmse).abs() < 1e-12);
    }

    #[test]
    fn memorizes_tiny_dataset() {
        let mut rng = Rng::new(10);
        let x = Matrix::from_vec(8, 2, (0..16).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..8).map(|_| rng.standard_normal()).collect();
        let d = Dataset::from_xy(x, y).unwrap();
        let s = ArchitectureSpec {
            hidden_layers: 2,
            neurons_per_layer: 32,
            activation: Activation::Tanh,
            batch_size: 8,
            learning_rate: 0.01,
            loss: Loss::L2,
        };
        let m = MlpModel::build(s, 2, &mut Rng::new(11)).unwrap();
        let cfg = TrainConfig {
            epochs: 2000,
            ..Default::default()
        };
        let out = train(m, &d, &d, &cfg).unwrap();
        let r = rmse(&out.model, &d).unwrap();
        assert!(r * r < 1e-3, "train mse {}", r * r);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = linear_data(10, 1);
        let m = MlpModel::build(spec(Activation::Relu, 4, 0.01), 2, &mut Rng::new(1)).unwrap();
        assert!(train(m.clone(), &d, &d, &TrainConfig::default()).is_err());
        let m = MlpModel::build(spec(Activation::Relu, 4, 0.01), 1, &mut Rng::new(1)).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train(m, &d, &d, &cfg).is_err());
    }

    #[test]
    fn divergence_in_first_epoch_is_an_error() {
        let x = Matrix::from_vec(4, 1, vec![1e200, -1e200, 1e200, 3e200]).unwrap();
        let d = Dataset::from_xy(x, vec![1e200, 0.0, 1.0, 2.0]).unwrap();
        let m = MlpModel::build(spec(Activation::Identity, 4, 0.05), 1, &mut Rng::new(1)).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        assert!(matches!(train(m, &d, &d, &cfg), Err(Error::Diverged { epoch: 1 })));
    }
}
