use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_LAYERS_RANGE: (usize, usize) = (1, 10);
pub const NEURONS_RANGE: (usize, usize) = (10, 100);
pub const BATCH_SIZES: [usize; 5] = [4, 8, 16, 32, 64];
pub const LEARNING_RATE_RANGE: (f64, f64) = (1e-4, 0.05);

/// Hidden-layer nonlinearity. Declaration order is the search-space order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "ReLU")]
    Relu,
    Tanh,
    Identity,
    #[serde(rename = "ELU")]
    Elu,
    #[serde(rename = "LeakyReLU")]
    LeakyRelu,
    Sigmoid,
}

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Identity,
        Activation::Elu,
        Activation::LeakyRelu,
        Activation::Sigmoid,
    ];

    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::Tanh => t.tanh(),
            Activation::Identity => t,
            Activation::Elu => {
                if t > 0.0 {
                    t
                } else {
                    t.exp_m1()
                }
            }
            Activation::LeakyRelu => {
                if t > 0.0 {
                    t
                } else {
                    LEAKY_RELU_SLOPE * t
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-t).exp()),
        }
    }

    /// Derivative at pre-activation `t`, given `out = apply(t)`.
    #[inline]
    pub fn derivative(self, t: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
            Activation::Elu => {
                if t > 0.0 {
                    1.0
                } else {
                    out + 1.0
                }
            }
            Activation::LeakyRelu => {
                if t > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
        }
    }

    /// ReLU-family activations get He initialization.
    pub fn is_relu_family(self) -> bool {
        matches!(self, Activation::Relu | Activation::Elu | Activation::LeakyRelu)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|a| *a == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "ReLU",
            Activation::Tanh => "Tanh",
            Activation::Identity => "Identity",
            Activation::Elu => "ELU",
            Activation::LeakyRelu => "LeakyReLU",
            Activation::Sigmoid => "Sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    L1,
    L2,
}

impl Loss {
    pub const ALL: [Loss; 2] = [Loss::L1, Loss::L2];

    /// Per-sample loss value.
    #[inline]
    pub fn value(self, pred: f64, target: f64) -> f64 {
        let e = pred - target;
        match self {
            Loss::L1 => e.abs(),
            Loss::L2 => e * e,
        }
    }

    /// Derivative of the per-sample loss with respect to the prediction.
    /// The L1 subgradient at zero residual is 0.
    #[inline]
    pub fn derivative(self, pred: f64, target: f64) -> f64 {
        let e = pred - target;
        match self {
            Loss::L1 => {
                if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::L2 => 2.0 * e,
        }
    }
}

/// One point of the architecture search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub activation: Activation,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: Loss,
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = HIDDEN_LAYERS_RANGE;
        if !(lo..=hi).contains(&self.hidden_layers) {
            return Err(Error::InvalidArgument(format!(
                "hidden_layers {} outside {lo}..={hi}",
                self.hidden_layers
            )));
        }
        let (lo, hi) = NEURONS_RANGE;
        if !(lo..=hi).contains(&self.neurons_per_layer) {
            return Err(Error::InvalidArgument(format!(
                "neurons_per_layer {} outside {lo}..={hi}",
                self.neurons_per_layer
            )));
        }
        if !BATCH_SIZES.contains(&self.batch_size) {
            return Err(Error::InvalidArgument(format!(
                "batch_size {} not one of {BATCH_SIZES:?}",
                self.batch_size
            )));
        }
        let (lo, hi) = LEARNING_RATE_RANGE;
        // Allow rounding noise from log-space decoding at the bounds.
        let tol = 1e-12;
        if !(self.learning_rate >= lo * (1.0 - tol) && self.learning_rate <= hi * (1.0 + tol)) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} outside [{lo}, {hi}]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} {} batch={} lr={:.4} {:?}",
            self.hidden_layers, self.neurons_per_layer, self.activation, self.batch_size, self.learning_rate, self.loss
        )
    }
}
