//! Adaptive-moment optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::params::Params;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: Params<T>>(params: &P) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        AdamState {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

pub fn adam_step<T: Scalar, P: Params<T>>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    let grads = grads.tensors();
    let params = params.tensors_mut();
    let shapes_match = params.len() == grads.len()
        && params.len() == state.first_moment.len()
        && params
            .iter()
            .zip(&grads)
            .zip(&state.first_moment)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.epsilon);
    let correction1 = T::one() - b1.powi(t);
    let correction2 = T::one() - b2.powi(t);

    for (((p, g), m), v) in params
        .into_iter()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (T::one() - b1) * gi;
            v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
