use alloc::vec;
use alloc::vec::Vec;

use super::model::ModelParameters;
use super::scalar::{c, Real};

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ModelParameters<T>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Adam { lr, beta1, beta2, eps, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut ModelParameters<T>, grads: &ModelParameters<T>) {
        self.step += 1;
        let (b1, b2): (T, T) = (c(self.beta1), c(self.beta2));
        let bc1: T = c(1.0 - libm::pow(self.beta1, f64::from(self.step)));
        let bc2: T = c(1.0 - libm::pow(self.beta2, f64::from(self.step)));
        let (lr, eps): (T, T) = (c(self.lr), c(self.eps));
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
