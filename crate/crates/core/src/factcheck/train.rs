use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, EvalReport, MetricError};
use super::model::{forward, predict_label, Example, ModelConfig, ModelError, ModelParameters};
use super::optim::Adam;
use super::pgd::{pgd_attack, PgdConfig};
use super::scalar::Real;
use super::model::loss_and_grad;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptySplit(&'static str),
    #[error("training diverged in epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub adversarial: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            adversarial: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::BadConfig("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return Err(TrainError::BadConfig("Adam betas must lie in [0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

/// One line of training history. Hyperparameters are repeated on every
/// record so a single line is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub clean_loss: f64,
    pub adversarial_loss: Option<f64>,
    pub validation_accuracy: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub adversarial: bool,
    pub pgd: Option<PgdConfig>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the best validation accuracy (earliest
    /// on ties); the initial parameters when no epoch ran.
    pub params: ModelParameters<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Adam on mean cross-entropy; with `tc.adversarial`, each step trains on
/// the PGD-perturbed batch instead of the clean one.
pub fn train<T: Real>(
    train_set: &[Example],
    validation: &[Example],
    mc: ModelConfig,
    tc: &TrainConfig,
    pc: Option<&PgdConfig>,
) -> Result<TrainOutcome<T>, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    if validation.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    tc.validate()?;
    let pgd = if tc.adversarial { Some(pc.copied().unwrap_or_default()) } else { None };
    if let Some(p) = &pgd {
        p.validate()?;
    }

    let mut params = ModelParameters::<T>::init(mc)?;
    let mut opt = Adam::new(&params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps);
    let mut rng = seeded(tc.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);
    let mut best: Option<(usize, f64, ModelParameters<T>)> = None;

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let (mut clean_sum, mut adv_sum) = (0.0, 0.0);
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let weight = batch.len() as f64;
            let grads = match &pgd {
                Some(p) => {
                    let out = pgd_attack(&params, &batch, p)?;
                    clean_sum += out.clean_loss.to_f64() * weight;
                    adv_sum += out.adversarial_loss.to_f64() * weight;
                    out.at_best.grads
                }
                None => {
                    let lg = loss_and_grad(&params, &batch, None)?;
                    clean_sum += lg.loss.to_f64() * weight;
                    lg.grads
                }
            };
            if !clean_sum.is_finite() || !adv_sum.is_finite() || !grads.all_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            opt.step(&mut params, &grads);
        }
        if !params.all_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let n = train_set.len() as f64;
        let val_acc = evaluate(&params, validation)?.accuracy;
        history.push(EpochRecord {
            epoch,
            clean_loss: clean_sum / n,
            adversarial_loss: pgd.map(|_| adv_sum / n),
            validation_accuracy: val_acc,
            learning_rate: tc.learning_rate,
            batch_size: tc.batch_size,
            seed: tc.seed,
            adversarial: tc.adversarial,
            pgd,
        });
        if best.as_ref().map_or(true, |(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, params.clone()));
        }
    }

    Ok(match best {
        Some((epoch, _, p)) => TrainOutcome { params: p, history, best_epoch: Some(epoch) },
        None => TrainOutcome { params, history, best_epoch: None },
    })
}

/// Predictions are argmax with ties going to class 1.
pub fn evaluate<T: Real>(params: &ModelParameters<T>, set: &[Example]) -> Result<EvalReport, TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySplit("evaluation"));
    }
    let mut counts = ConfusionCounts::default();
    for ex in set {
        let (probs, _) = forward(params, &ex.tokens, None)?;
        counts.record(predict_label(probs[1]), ex.label);
    }
    Ok(EvalReport::from_counts(counts)?)
}

/// Accuracy when each example is attacked on its own with PGD.
pub fn adversarial_accuracy<T: Real>(params: &ModelParameters<T>, set: &[Example], pc: &PgdConfig) -> Result<f64, TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySplit("evaluation"));
    }
    let mut correct = 0usize;
    for ex in set {
        let single = core::slice::from_ref(ex);
        let out = pgd_attack(params, single, pc)?;
        let (probs, _) = forward(params, &ex.tokens, Some(&out.deltas[0]))?;
        if predict_label(probs[1]) == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy(n: usize, seed: u64) -> Vec<Example> {
        use rand::Rng;
        let mut rng = seeded(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut tokens: Vec<u32> = (0..6).map(|_| rng.gen_range(2..20)).collect();
                tokens[rng.gen_range(0..6)] = u32::from(label);
                Example { tokens, label }
            })
            .collect()
    }

    fn mc() -> ModelConfig {
        ModelConfig { vocab_size: 20, d_model: 8, n_heads: 2, n_layers: 1, d_ff: 16, max_len: 8, n_classes: 2, seed: 3 }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let tc = TrainConfig { epochs: 0, ..Default::default() };
        let out = train::<f64>(&toy(8, 1), &toy(4, 2), mc(), &tc, None).unwrap();
        assert_eq!(out.params, ModelParameters::init(mc()).unwrap());
        assert!(out.history.is_empty());
        assert_eq!(out.best_epoch, None);
    }

    #[test]
    fn learns_a_separable_two_token_task() {
        let tc = TrainConfig { epochs: 20, learning_rate: 1e-2, batch_size: 16, ..Default::default() };
        let out = train::<f64>(&toy(200, 1), &toy(60, 2), mc(), &tc, None).unwrap();
        let acc = evaluate(&out.params, &toy(100, 3)).unwrap().accuracy;
        assert!(acc >= 0.95, "{acc} {:?}", out.history.last());
    }

    #[test]
    fn identical_seeds_identical_history() {
        let tc = TrainConfig { epochs: 2, batch_size: 4, adversarial: true, ..Default::default() };
        let a = train::<f64>(&toy(16, 1), &toy(4, 2), mc(), &tc, Some(&PgdConfig::default())).unwrap();
        let b = train::<f64>(&toy(16, 1), &toy(4, 2), mc(), &tc, Some(&PgdConfig::default())).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        assert!(a.history.iter().all(|r| r.adversarial_loss.unwrap() >= r.clean_loss - 1e-12));
    }

    #[test]
    fn empty_splits_rejected() {
        let tc = TrainConfig::default();
        assert_eq!(train::<f64>(&[], &toy(2, 1), mc(), &tc, None).unwrap_err(), TrainError::EmptySplit("training"));
        assert_eq!(train::<f64>(&toy(2, 1), &[], mc(), &tc, None).unwrap_err(), TrainError::EmptySplit("validation"));
        let p = ModelParameters::<f64>::zeros(mc()).unwrap();
        assert!(evaluate(&p, &[]).is_err());
    }

    #[test]
    fn divergence_names_epoch() {
        let tc = TrainConfig { epochs: 3, learning_rate: 1e300, batch_size: 2, ..Default::default() };
        let err = train::<f64>(&toy(8, 1), &toy(4, 2), mc(), &tc, None).unwrap_err();
        assert_eq!(err, TrainError::Diverged { epoch: 1 });
    }

    #[test]
    fn zero_params_predict_positive() {
        let p = ModelParameters::<f64>::zeros(mc()).unwrap();
        let set = vec![Example { tokens: vec![1], label: 1 }, Example { tokens: vec![2], label: 0 }];
        let r = evaluate(&p, &set).unwrap();
        assert_eq!(r.counts, ConfusionCounts::new(1, 1, 0, 0));
    }
}
