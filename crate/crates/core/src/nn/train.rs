use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{Classifier, Input};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            learning_rate: adam.learning_rate,
            batch_size: 32,
            epochs: 100,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.epochs > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !positive {
            return Err(Error::Config(format!("invalid training settings {self:?}")));
        }
        Ok(())
    }
}

/// Mini-batch training with a fresh shuffle every epoch. Returns the mean
/// loss of each epoch. Deterministic given `config.seed`.
pub fn train<T: Scalar>(model: &mut Classifier<T>, data: &[(Input<T>, usize)], config: &TrainConfig) -> Result<Vec<T>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Parameter("no training examples".into()));
    }
    let adam = config.adam();
    let mut state = AdamState::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Input<T>, usize)> = chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let (loss, grad) = model.loss_and_grad(&batch)?;
            adam_step(model, &grad, &mut state, &adam)?;
            total += loss * T::from_usize(chunk.len()).unwrap();
        }
        history.push(total / T::from_usize(data.len()).unwrap());
    }
    Ok(history)
}
