//! Parameter updates. Both steps read the gradient buffers and leave them
//! untouched; call `zero_grad` between minibatches.

use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(1e-3)
    }
}

pub fn adam_step(params: &mut ModelParams, hyper: &Adam) {
    params.adam_steps += 1;
    let t = params.adam_steps as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for p in params.iter_mut() {
        let m = p.moment1.iter_mut();
        let v = p.moment2.iter_mut();
        for (((w, &g), m), v) in p.value.iter_mut().zip(p.grad.iter()).zip(m).zip(v) {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            let step = hyper.lr * (*m / bc1) / ((*v / bc2).sqrt() + hyper.eps);
            *w = (f64::from(*w) - step) as f32;
        }
    }
}

pub fn sgd_step(params: &mut ModelParams, lr: f64) {
    for p in params.iter_mut() {
        for (w, &g) in p.value.iter_mut().zip(p.grad.iter()) {
            *w = (f64::from(*w) - lr * g) as f32;
        }
    }
}
