//! AdamW and the cosine learning-rate schedule.

use crate::autodiff::C64;
use crate::config::OptimConfig;
use crate::model::{Grads, ParamId, Params};

/// Cosine annealing from `lr_max` at step 0 to `lr_min` at the last step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_steps: u64,
}

impl CosineSchedule {
    pub fn lr(&self, step: u64) -> f64 {
        if self.total_steps <= 1 {
            return self.lr_max;
        }
        let t = step.min(self.total_steps - 1) as f64 / (self.total_steps - 1) as f64;
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// AdamW over the real and imaginary parts separately, with decoupled
/// weight decay on every tensor except the LCU coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Completed steps.
    pub t: u64,
    /// First moments, one vector per tensor in [`ParamId::ALL`] order.
    pub m: Vec<Vec<C64>>,
    /// Second moments; the real part tracks `Re g²`, the imaginary `Im g²`.
    pub v: Vec<Vec<C64>>,
}

impl AdamW {
    pub fn new(cfg: &OptimConfig, params: &Params) -> Self {
        let zeros: Vec<Vec<C64>> = params.iter().map(|(_, t)| vec![C64::new(0.0, 0.0); t.len()]).collect();
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Grads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, id) in ParamId::ALL.into_iter().enumerate() {
            let complex = id.is_complex();
            let decay = if id.decays() { lr * self.weight_decay } else { 0.0 };
            let embed_dim = params.get(ParamId::Embeddings).shape[1];
            let tensor = params.get_mut(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, p) in tensor.data.iter_mut().enumerate() {
                let g = grads.entry(id, i, embed_dim);
                let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let step = (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
                    p - decay * p - lr * step
                };
                p.re = update(p.re, g.re, &mut m[i].re, &mut v[i].re);
                if complex {
                    p.im = update(p.im, g.im, &mut m[i].im, &mut v[i].im);
                }
            }
        }
    }
}
