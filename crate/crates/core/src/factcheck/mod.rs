//! Credibility classifier: transformer, adversarial training and evaluation.

mod checkpoint;
mod gradcheck;
mod linalg;
mod metrics;
mod model;
mod optim;
mod pgd;
mod scalar;
mod stats;
pub mod synth;
mod train;
mod vocab;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{check_instance, gradient_check, relative_error, CheckInstance, GradCheckError, GradCheckReport, DEFAULT_PARAM_SAMPLES};
pub use metrics::{accuracy, f1, mcc, ConfusionCounts, EvalReport, MetricError};
pub use model::{
    batch_loss, cross_entropy, forward, loss_and_grad, positive_probability, predict_label, tensor_shapes, Example,
    ForwardCache, LayerParams, LossGrad, ModelConfig, ModelError, ModelParameters,
};
pub use optim::Adam;
pub use pgd::{pgd_attack, pgd_step, sign, PgdConfig, PgdOutcome};
pub use scalar::Real;
pub use stats::{regularized_incomplete_beta, student_t_two_sided_p, ttest_independent, StatsError, TTestResult};
pub use train::{adversarial_accuracy, evaluate, train, EpochRecord, TrainConfig, TrainError, TrainOutcome};
pub use vocab::{credibility_score, ModelVocab, UNK, UNK_ID};
