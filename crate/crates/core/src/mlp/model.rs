use serde::{Deserialize, Serialize};

use super::dense::{Dense, Init};
use super::spec::{Activation, ArchitectureSpec, Loss};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Fully connected regressor: `hidden_layers` activated layers of equal
/// width followed by a linear scalar head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpWire", into = "MlpWire")]
pub struct MlpModel {
    spec: ArchitectureSpec,
    input_width: usize,
    layers: Vec<Dense>,
}

/// Per-layer gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Reusable row-major `rows × width` buffers for batched passes.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    rows: usize,
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

/// Rows per chunk for inference.
const FORWARD_CHUNK: usize = 64;

impl Workspace {
    pub(crate) fn new(model: &MlpModel, rows: usize) -> Self {
        let rows = rows.max(1);
        let mut act = vec![vec![0.0; rows * model.input_width]];
        let mut pre = Vec::new();
        for l in &model.layers {
            pre.push(vec![0.0; rows * l.n_out()]);
            act.push(vec![0.0; rows * l.n_out()]);
        }
        let delta = pre.clone();
        Self { rows, pre, act, delta }
    }
}

impl MlpModel {
    /// Fresh network: He-uniform weights for ReLU-family activations,
    /// Xavier-uniform otherwise (and for the linear head); zero biases.
    pub fn build(spec: ArchitectureSpec, input_width: usize, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        if input_width == 0 {
            return Err(Error::InvalidArgument("input width must be >= 1".into()));
        }
        let hidden_init = if spec.activation.is_relu_family() {
            Init::He
        } else {
            Init::Xavier
        };
        let mut layers = Vec::with_capacity(spec.hidden_layers + 1);
        let mut n_in = input_width;
        for _ in 0..spec.hidden_layers {
            layers.push(Dense::init(n_in, spec.neurons_per_layer, hidden_init, rng));
            n_in = spec.neurons_per_layer;
        }
        layers.push(Dense::init(n_in, 1, Init::Xavier, rng));
        Ok(Self {
            spec,
            input_width,
            layers,
        })
    }

    pub fn from_parts(spec: ArchitectureSpec, input_width: usize, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.hidden_layers + 1 {
            return Err(Error::Schema(format!(
                "expected {} layers, found {}",
                spec.hidden_layers + 1,
                layers.len()
            )));
        }
        let mut n_in = input_width;
        for (k, l) in layers.iter().enumerate() {
            let n_out = if k == spec.hidden_layers { 1 } else { spec.neurons_per_layer };
            if l.w.shape() != (n_in, n_out) || l.b.len() != n_out {
                return Err(Error::Schema(format!(
                    "layer {k} has shape {:?}/{}, expected ({n_in}, {n_out})",
                    l.w.shape(),
                    l.b.len()
                )));
            }
            if !l.is_finite() {
                return Err(Error::Schema(format!("layer {k} has non-finite parameters")));
            }
            n_in = n_out;
        }
        Ok(Self {
            spec,
            input_width,
            layers,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Little-endian bytes of every parameter, layer by layer.
    pub fn parameter_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.param_count() * 8);
        for l in &self.layers {
            for v in l.w.as_slice().iter().chain(&l.b) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Zero-filled gradient buffers shaped like this model.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(|l| Dense::zeros(l.n_in(), l.n_out())).collect(),
        }
    }

    /// Forward pass for the first `n` rows loaded into `ws.act[0]`.
    fn forward_rows(&self, n: usize, ws: &mut Workspace) {
        let act_fn = self.spec.activation;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (before, after) = ws.act.split_at_mut(k + 1);
            let width = layer.n_out();
            let pre = &mut ws.pre[k][..n * width];
            layer.forward_rows_into(&before[k][..n * layer.n_in()], n, pre);
            let out = &mut after[0][..n * width];
            if k == last {
                out.copy_from_slice(pre);
            } else {
                for (o, &t) in out.iter_mut().zip(pre.iter()) {
                    *o = act_fn.apply(t);
                }
            }
        }
    }

    /// Backpropagates `ws.delta[last][..n]` through the rows of the last
    /// forward pass, adding parameter gradients into `grads`.
    fn backward_rows(&self, n: usize, ws: &mut Workspace, grads: &mut Gradients) {
        let act_fn = self.spec.activation;
        let last = self.layers.len() - 1;
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            let (lower, upper) = ws.delta.split_at_mut(k);
            let d_out = &upper[0][..n * layer.n_out()];
            let x = &ws.act[k][..n * layer.n_in()];
            if k > 0 {
                let d_in = &mut lower[k - 1][..n * layer.n_in()];
                layer.backward_rows_into(x, d_out, n, &mut grads.layers[k], Some(&mut *d_in));
                for ((d, &t), &a) in d_in.iter_mut().zip(&ws.pre[k - 1]).zip(&ws.act[k]) {
                    *d *= act_fn.derivative(t, a);
                }
            } else {
                layer.backward_rows_into(x, d_out, n, &mut grads.layers[k], None);
            }
        }
    }

    fn check_width(&self, w: usize) -> Result<()> {
        if w != self.input_width {
            return Err(Error::Dimension(format!(
                "model expects {} inputs, got {w}",
                self.input_width
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x.len())?;
        let mut ws = Workspace::new(self, 1);
        ws.act[0].copy_from_slice(x);
        self.forward_rows(1, &mut ws);
        Ok(ws.act[self.layers.len()][0])
    }

    /// Row-wise predictions; bit-identical to calling [`forward`](Self::forward) per row.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_width(x.cols())?;
        let mut ws = Workspace::new(self, FORWARD_CHUNK.min(x.rows()));
        let mut out = Vec::with_capacity(x.rows());
        let data = x.as_slice();
        let w = self.input_width;
        for chunk in data.chunks(ws.rows * w) {
            let n = chunk.len() / w;
            ws.act[0][..chunk.len()].copy_from_slice(chunk);
            self.forward_rows(n, &mut ws);
            out.extend_from_slice(&ws.act[self.layers.len()][..n]);
        }
        Ok(out)
    }

    /// Mean loss over the batch and its gradient.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64], loss: Loss) -> Result<(f64, Gradients)> {
        self.check_width(x.cols())?;
        if x.rows() != y.len() {
            return Err(Error::Dimension(format!("{} rows vs {} targets", x.rows(), y.len())));
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset("empty batch".into()));
        }
        let idx: Vec<usize> = (0..y.len()).collect();
        let mut ws = Workspace::new(self, y.len());
        let mut grads = self.zero_gradients();
        let value = self.accumulate(x, y, &idx, loss, &mut ws, &mut grads);
        if !value.is_finite() {
            return Err(Error::NonFinite("forward pass produced a non-finite loss".into()));
        }
        Ok((value, grads))
    }

    /// Adds the mean-loss gradient over rows `idx` into `grads` (which the
    /// caller zeroes) and returns the mean loss. `idx` must fit in `ws`.
    pub(crate) fn accumulate(
        &self,
        x: &Matrix,
        y: &[f64],
        idx: &[usize],
        loss: Loss,
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) -> f64 {
        let n = idx.len();
        assert!(n <= ws.rows, "batch larger than workspace");
        let w = self.input_width;
        for (b, &i) in idx.iter().enumerate() {
            ws.act[0][b * w..(b + 1) * w].copy_from_slice(x.row(i));
        }
        self.forward_rows(n, ws);
        let last = self.layers.len() - 1;
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        for (b, &i) in idx.iter().enumerate() {
            let pred = ws.act[last + 1][b];
            total += loss.value(pred, y[i]);
            ws.delta[last][b] = loss.derivative(pred, y[i]) * scale;
        }
        self.backward_rows(n, ws, grads);
        total * scale
    }
}

impl Gradients {
    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.w.as_mut_slice().fill(0.0);
            l.b.fill(0.0);
        }
    }

    pub fn flat(&self) -> Vec<Vec<f64>> {
        super::dense::flatten_grads(&self.layers).into_iter().map(<[f64]>::to_vec).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MlpWire {
    kind: String,
    spec: ArchitectureSpec,
    input_width: usize,
    layers: Vec<Dense>,
    format_version: u64,
}

impl From<MlpModel> for MlpWire {
    fn from(m: MlpModel) -> Self {
        Self {
            kind: "mlp".into(),
            spec: m.spec,
            input_width: m.input_width,
            layers: m.layers,
            format_version: MODEL_FORMAT_VERSION,
        }
    }
}

impl TryFrom<MlpWire> for MlpModel {
    type Error = Error;

    fn try_from(w: MlpWire) -> Result<Self> {
        if w.kind != "mlp" {
            return Err(Error::Schema(format!("expected kind \"mlp\", found {:?}", w.kind)));
        }
        if w.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: w.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        MlpModel::from_parts(w.spec, w.input_width, w.layers)
    }
}
