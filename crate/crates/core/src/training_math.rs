//! Reward-model regression loss and the PPO clipped surrogate objective,
//! as plain functions over scalars.

use thiserror::Error;

use crate::metrics::answer_score;

#[derive(Debug, Error, PartialEq)]
pub enum TrainingMathError {
    #[error("predicted and target lengths differ ({predicted} vs {target})")]
    LengthMismatch { predicted: usize, target: usize },
    #[error("reward batch is empty")]
    EmptyBatch,
    #[error("target reward {0} outside [0, 1]")]
    TargetOutOfRange(f64),
    #[error("probability ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("clip epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
}

/// Reward-model targets are answer F1 scores.
pub fn reward_target(final_answer: &str, gold: &str) -> f64 {
    answer_score(final_answer, gold).f1
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBatch {
    predicted: Vec<f64>,
    target: Vec<f64>,
}

impl RewardBatch {
    pub fn new(predicted: Vec<f64>, target: Vec<f64>) -> Result<Self, TrainingMathError> {
        if predicted.len() != target.len() {
            return Err(TrainingMathError::LengthMismatch {
                predicted: predicted.len(),
                target: target.len(),
            });
        }
        if predicted.is_empty() {
            return Err(TrainingMathError::EmptyBatch);
        }
        if let Some(&t) = target.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(TrainingMathError::TargetOutOfRange(t));
        }
        Ok(Self { predicted, target })
    }
}

/// Mean squared error between predicted and target rewards.
pub fn reward_model_loss(batch: &RewardBatch) -> f64 {
    let n = batch.predicted.len() as f64;
    batch
        .predicted
        .iter()
        .zip(&batch.target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n
}

pub fn clip_ratio(ratio: f64, epsilon: f64) -> f64 {
    ratio.max(1.0 - epsilon).min(1.0 + epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSample {
    pub ratio: f64,
    pub advantage: f64,
    pub epsilon: f64,
}

impl PpoSample {
    pub fn new(ratio: f64, advantage: f64, epsilon: f64) -> Result<Self, TrainingMathError> {
        if ratio.is_nan() || ratio <= 0.0 {
            return Err(TrainingMathError::NonPositiveRatio(ratio));
        }
        if epsilon.is_nan() || epsilon <= 0.0 || epsilon >= 1.0 {
            return Err(TrainingMathError::Epsilon(epsilon));
        }
        Ok(Self {
            ratio,
            advantage,
            epsilon,
        })
    }
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)`.
pub fn ppo_sample_objective(sample: &PpoSample) -> f64 {
    let unclipped = sample.ratio * sample.advantage;
    let clipped = clip_ratio(sample.ratio, sample.epsilon) * sample.advantage;
    unclipped.min(clipped)
}

/// Mean per-sample objective; `None` for an empty batch.
pub fn ppo_objective(samples: &[PpoSample]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    Some(samples.iter().map(ppo_sample_objective).sum::<f64>() / samples.len() as f64)
}
