//! L-infinity projected gradient ascent on the embedded input.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{loss_and_grad, Example, LossGrad, ModelError, ModelParameters};
use super::scalar::{c, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    /// Radius of the L-infinity ball.
    pub epsilon: f64,
    /// Step size of each signed-gradient step.
    pub alpha: f64,
    pub steps: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig { epsilon: 0.05, alpha: 0.0125, steps: 4 }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ModelError::BadConfig("epsilon must be finite and non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ModelError::BadConfig("alpha must be positive"));
        }
        if self.steps == 0 {
            return Err(ModelError::BadConfig("PGD needs at least one step"));
        }
        Ok(())
    }
}

/// `sign(x)` with `sign(0) = 0`.
#[inline]
pub fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// One ascent step followed by projection onto `[-epsilon, epsilon]`.
pub fn pgd_step<T: Real>(delta: &mut [T], grad: &[T], alpha: T, epsilon: T) {
    for (d, &g) in delta.iter_mut().zip(grad) {
        *d = (*d + alpha * sign(g)).max(-epsilon).min(epsilon);
    }
}

#[derive(Debug, Clone)]
pub struct PgdOutcome<T> {
    /// The highest-loss iterate, one perturbation per example.
    pub deltas: Vec<Vec<T>>,
    pub adversarial_loss: T,
    pub clean_loss: T,
    /// Index of the chosen iterate; 0 is the unperturbed input.
    pub best_step: usize,
    /// Gradients evaluated at the chosen iterate.
    pub at_best: LossGrad<T>,
}

/// Start from zero, take `steps` signed-gradient steps projected onto the
/// epsilon ball, and return the iterate with the largest batch loss.
pub fn pgd_attack<T: Real>(params: &ModelParameters<T>, batch: &[Example], cfg: &PgdConfig) -> Result<PgdOutcome<T>, ModelError> {
    cfg.validate()?;
    let n = params.config.perturbation_len();
    let (alpha, eps): (T, T) = (c(cfg.alpha), c(cfg.epsilon));
    let mut deltas: Vec<Vec<T>> = vec![vec![T::zero(); n]; batch.len()];
    let first = loss_and_grad(params, batch, Some(&deltas))?;
    let clean_loss = first.loss;
    let mut best = (0, deltas.clone(), first);
    let mut grad_src = best.2.delta_grads.clone();
    for step in 1..=cfg.steps {
        for (d, g) in deltas.iter_mut().zip(&grad_src) {
            pgd_step(d, g, alpha, eps);
        }
        let lg = loss_and_grad(params, batch, Some(&deltas))?;
        grad_src.clone_from(&lg.delta_grads);
        if lg.loss > best.2.loss {
            best = (step, deltas.clone(), lg);
        }
    }
    let (best_step, deltas, at_best) = best;
    Ok(PgdOutcome { deltas, adversarial_loss: at_best.loss, clean_loss, best_step, at_best })
}
