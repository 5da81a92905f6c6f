use std::f64::consts::PI;

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

/// Cosine annealing from `base` at step 0 down to `floor` at `total` steps.
#[derive(Debug, Clone, Copy)]
pub struct CosineAnnealing {
    pub base: f64,
    pub floor: f64,
    pub total: usize,
}

impl CosineAnnealing {
    pub fn lr(&self, step: usize) -> f64 {
        if self.total == 0 {
            return self.base;
        }
        let progress = (step.min(self.total)) as f64 / self.total as f64;
        self.floor + 0.5 * (self.base - self.floor) * (1.0 + (PI * progress).cos())
    }
}
