//! Binary classification scores: MCC, accuracy, F1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("confusion counts are empty")]
    Empty,
    #[error("prediction and label slices differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Result<Self, MetricError> {
        if predicted.len() != actual.len() {
            return Err(MetricError::LengthMismatch(predicted.len(), actual.len()));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            c.record(p, a);
        }
        Ok(c)
    }

    fn check(&self) -> Result<(), MetricError> {
        if self.total() == 0 {
            Err(MetricError::Empty)
        } else {
            Ok(())
        }
    }
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn mcc(c: &ConfusionCounts) -> Result<f64, MetricError> {
    c.check()?;
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / libm::sqrt(denom))
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64, MetricError> {
    c.check()?;
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

/// `2tp / (2tp + fp + fn)`; 0 when the denominator is 0.
pub fn f1(c: &ConfusionCounts) -> Result<f64, MetricError> {
    c.check()?;
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok((2 * c.tp) as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mcc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl EvalReport {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self, MetricError> {
        Ok(EvalReport { mcc: mcc(&counts)?, accuracy: accuracy(&counts)?, f1: f1(&counts)?, counts })
    }
}
