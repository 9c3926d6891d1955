use crate::scalar::Scalar;

use super::model::TensorSpec;

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Per-parameter flag: decay applies to convolution weights only.
    decay: Vec<bool>,
    m: Vec<S>,
    v: Vec<S>,
    t: u32,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(specs: &[TensorSpec], weight_decay: f64) -> Self {
        let len = specs.iter().map(|s| s.offset + s.len()).max().unwrap_or(0);
        let mut decay = vec![false; len];
        for s in specs.iter().filter(|s| s.name.ends_with(".weight")) {
            decay[s.offset..s.offset + s.len()].fill(true);
        }
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, decay, m: vec![S::zero(); len], v: vec![S::zero(); len], t: 0 }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [S], grads: &[S], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "optimizer built for a different model");
        self.t += 1;
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let c1 = S::of(1.0 - self.beta1.powi(self.t as i32));
        let c2 = S::of(1.0 - self.beta2.powi(self.t as i32));
        let lr_s = S::of(lr);
        let eps = S::of(self.eps);
        let shrink = S::of(1.0 - lr * self.weight_decay);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (S::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (S::one() - b2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            if self.decay[i] {
                params[i] *= shrink;
            }
            params[i] -= lr_s * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Linear warmup followed by optional cosine decay to zero.
pub fn learning_rate(base: f64, step: usize, total: usize, warmup: usize, cosine: bool) -> f64 {
    let warm = if warmup == 0 { 1.0 } else { ((step + 1) as f64 / warmup as f64).min(1.0) };
    let decay = if cosine && total > warmup {
        let t = step.saturating_sub(warmup) as f64 / (total - warmup) as f64;
        0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos())
    } else {
        1.0
    };
    base * warm * decay
}
