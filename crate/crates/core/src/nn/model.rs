//! Classifier over either a fixed-size vector or an (audio, text) sequence
//! pair fused by cross-attention.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{AttentionCache, CrossAttention, DEFAULT_D_MODEL};
use super::mlp::{check_input, Mlp, DEFAULT_HIDDEN1, DEFAULT_HIDDEN2};
use super::ops::{log_sum_exp, softmax};
use super::params::Params;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    /// Common width of both sides inside cross-attention.
    pub d_model: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden1: DEFAULT_HIDDEN1,
            hidden2: DEFAULT_HIDDEN2,
            d_model: DEFAULT_D_MODEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input<T> {
    Vector(Array1<T>),
    Pair { audio: Array2<T>, text: Array2<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<T> {
    pub attention: Option<CrossAttention<T>>,
    pub mlp: Mlp<T>,
}

impl<T: Scalar> Classifier<T> {
    pub fn dense(d_in: usize, n_classes: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        Classifier {
            attention: None,
            mlp: Mlp::init(d_in, cfg.hidden1, cfg.hidden2, n_classes, rng),
        }
    }

    pub fn with_cross_attention(
        d_audio: usize,
        d_text: usize,
        n_classes: usize,
        cfg: &ModelConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let attention = CrossAttention::init(d_audio, d_text, cfg.d_model, rng);
        let mlp = Mlp::init(attention.d_out(), cfg.hidden1, cfg.hidden2, n_classes, rng);
        Classifier {
            attention: Some(attention),
            mlp,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.mlp.n_classes()
    }

    /// Stacks the MLP inputs of a batch, running cross-attention where needed.
    fn features(&self, inputs: &[&Input<T>]) -> Result<(Array2<T>, Vec<AttentionCache<T>>)> {
        let d_in = self.mlp.d_in();
        let mut x = Array2::zeros((inputs.len(), d_in));
        let mut caches = Vec::new();
        for (i, input) in inputs.iter().enumerate() {
            match (input, &self.attention) {
                (Input::Vector(v), None) => {
                    check_input(v.as_slice().unwrap(), d_in)?;
                    x.row_mut(i).assign(v);
                }
                (Input::Pair { audio, text }, Some(att)) => {
                    let (fused, cache) = att.forward(audio.view(), text.view())?;
                    x.row_mut(i).assign(&fused);
                    caches.push(cache);
                }
                (Input::Vector(_), Some(_)) => {
                    return Err(Error::Shape("cross-attention model got a plain vector".into()))
                }
                (Input::Pair { .. }, None) => {
                    return Err(Error::Shape("dense model got a sequence pair".into()))
                }
            }
        }
        Ok((x, caches))
    }

    pub fn logits(&self, input: &Input<T>) -> Result<Vec<T>> {
        let (x, _) = self.features(&[input])?;
        Ok(self.mlp.forward_batch(x.view()).logits.row(0).to_vec())
    }

    pub fn probabilities(&self, input: &Input<T>) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Arg-max class; ties go to the lower index.
    pub fn predict(&self, input: &Input<T>) -> Result<usize> {
        Ok(argmax(self.logits(input)?.iter().copied()))
    }

    pub fn predict_batch(&self, inputs: &[&Input<T>]) -> Result<Vec<usize>> {
        let (x, _) = self.features(inputs)?;
        let logits = self.mlp.forward_batch(x.view()).logits;
        Ok(logits.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &[(&Input<T>, usize)]) -> Result<T> {
        self.loss_and_grad_impl(batch, false).map(|(l, _)| l)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[(&Input<T>, usize)]) -> Result<(T, Classifier<T>)> {
        self.loss_and_grad_impl(batch, true)
            .map(|(l, g)| (l, g.expect("gradient requested")))
    }

    fn loss_and_grad_impl(&self, batch: &[(&Input<T>, usize)], with_grad: bool) -> Result<(T, Option<Classifier<T>>)> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let n_classes = self.n_classes();
        if let Some(&(_, label)) = batch.iter().find(|(_, l)| *l >= n_classes) {
            return Err(Error::Label { label, n_classes });
        }
        let inputs: Vec<&Input<T>> = batch.iter().map(|(x, _)| *x).collect();
        let (x, caches) = self.features(&inputs)?;
        let cache = self.mlp.forward_batch(x.view());

        let inv_n = T::one() / T::from_usize(batch.len()).unwrap();
        let mut loss = T::zero();
        let mut d_logits = Array2::zeros(cache.logits.raw_dim());
        for (i, &(_, label)) in batch.iter().enumerate() {
            let z = cache.logits.row(i);
            let lse = log_sum_exp(z.as_slice().unwrap());
            loss += lse - z[label];
            for (c, d) in d_logits.row_mut(i).iter_mut().enumerate() {
                let p = (z[c] - lse).exp();
                let target = if c == label { T::one() } else { T::zero() };
                *d = (p - target) * inv_n;
            }
        }
        let loss = loss * inv_n;
        if !loss.is_finite() {
            return Err(Error::Numeric("training loss".into()));
        }
        if !with_grad {
            return Ok((loss, None));
        }

        let mut grad = self.zeros_like();
        let dx = self
            .mlp
            .backward_batch(&cache, d_logits.view(), &mut grad.mlp, self.attention.is_some());
        if let (Some(att), Some(g_att), Some(dx)) = (&self.attention, &mut grad.attention, dx) {
            for (row, c) in dx.axis_iter(Axis(0)).zip(&caches) {
                att.backward(c, row, g_att);
            }
        }
        Ok((loss, Some(grad)))
    }
}

fn argmax<T: Scalar>(values: impl Iterator<Item = T>) -> usize {
    let mut best = (0, T::neg_infinity());
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Gradient of the mean batch loss with respect to every parameter of `params`.
pub fn backward<T: Scalar>(batch: &[(&Input<T>, usize)], params: &Classifier<T>) -> Result<Classifier<T>> {
    params.loss_and_grad(batch).map(|(_, g)| g)
}

impl<T: Scalar> Params<T> for Classifier<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.attention.as_ref().map(|a| a.tensors()).unwrap_or_default();
        v.extend(self.mlp.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self
            .attention
            .as_mut()
            .map(|a| a.tensors_mut())
            .unwrap_or_default();
        v.extend(self.mlp.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Classifier {
            attention: self.attention.as_ref().map(|a| a.zeros_like()),
            mlp: self.mlp.zeros_like(),
        }
    }
}

impl<T: Scalar> Input<T> {
    pub fn vector(v: impl Into<Vec<T>>) -> Self {
        Input::Vector(Array1::from(v.into()))
    }

    pub fn as_vector(&self) -> Option<ArrayView1<'_, T>> {
        match self {
            Input::Vector(v) => Some(v.view()),
            Input::Pair { .. } => None,
        }
    }
}
