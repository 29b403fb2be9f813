use serde::{Deserialize, Serialize};

use super::multiversion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are shaped lazily from the
/// first call to [`Adam::step`].
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            lr,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. `params` and `grads` are parallel lists of tensors.
    pub fn step<G: AsRef<[f64]>>(&mut self, params: &mut [&mut [f64]], grads: &[G]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count mismatch");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.as_ref().len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let step = self.lr / bc1;
        let k = StepConsts { beta1, beta2, eps, bc2, step };
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let g = g.as_ref();
            assert_eq!(p.len(), g.len(), "tensor shape mismatch");
            update(p, g, m, v, &k);
        }
    }
}

struct StepConsts {
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc2: f64,
    step: f64,
}

#[inline(always)]
fn update_kernel(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], k: &StepConsts) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = k.beta1 * *m + (1.0 - k.beta1) * g;
        *v = k.beta2 * *v + (1.0 - k.beta2) * g * g;
        *p -= k.step * *m / ((*v / k.bc2).sqrt() + k.eps);
    }
}

multiversion!(fn update => update_kernel(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], k: &StepConsts));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = vec![0.3, -1.2, 5.0];
        let before = w.clone();
        let mut adam = Adam::new(0.01, AdamConfig::default());
        adam.step(&mut [&mut w[..]], &[vec![0.0; 3]]);
        assert_eq!(w, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first step is lr * sign(g) (up to eps).
        let mut w = vec![1.0, 1.0];
        let mut adam = Adam::new(0.1, AdamConfig::default());
        adam.step(&mut [&mut w[..]], &[vec![2.0, -0.5]]);
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut w = vec![3.0];
        let mut adam = Adam::new(0.05, AdamConfig::default());
        for _ in 0..2000 {
            let g = vec![2.0 * (w[0] - 1.0)];
            adam.step(&mut [&mut w[..]], &[g]);
        }
        assert!((w[0] - 1.0).abs() < 1e-3);
    }
}
