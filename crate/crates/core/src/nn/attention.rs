//! Bidirectional cross-attention between an audio and a text sequence.
//!
//! Both sequences are projected to `d_model`. Audio queries attend over
//! text keys/values and text queries attend over audio keys/values (one
//! head each, scaled dot product). Each direction's output rows are
//! mean-pooled and the two pooled vectors are concatenated.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{glorot, slice2, slice2_mut, Dense, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_D_MODEL: usize = 128;

/// Query/key/value maps of one attention direction, each `[d_model, d_model]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead<T> {
    pub query: Array2<T>,
    pub key: Array2<T>,
    pub value: Array2<T>,
}

#[derive(Debug, Clone)]
struct HeadCache<T> {
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    attn: Array2<T>,
}

fn softmax_rows<T: Scalar>(scores: &mut Array2<T>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
}

impl<T: Scalar> AttentionHead<T> {
    pub fn zeros(d: usize) -> Self {
        AttentionHead {
            query: Array2::zeros((d, d)),
            key: Array2::zeros((d, d)),
            value: Array2::zeros((d, d)),
        }
    }

    pub fn glorot(d: usize, rng: &mut impl Rng) -> Self {
        AttentionHead {
            query: glorot(d, d, rng),
            key: glorot(d, d, rng),
            value: glorot(d, d, rng),
        }
    }

    fn scale(&self) -> T {
        T::one() / T::from_usize(self.query.nrows()).unwrap().sqrt()
    }

    /// Attention of `queries_from` rows over `keys_from` rows, mean-pooled.
    fn forward(&self, queries_from: ArrayView2<T>, keys_from: ArrayView2<T>) -> (Array1<T>, HeadCache<T>) {
        let q = queries_from.dot(&self.query);
        let k = keys_from.dot(&self.key);
        let v = keys_from.dot(&self.value);
        let mut attn = q.dot(&k.t()) * self.scale();
        softmax_rows(&mut attn);
        let out = attn.dot(&v);
        let pooled = out.mean_axis(Axis(0)).expect("at least one query row");
        (pooled, HeadCache { q, k, v, attn })
    }

    /// Returns `(d queries_from, d keys_from)` and accumulates into `grad`.
    fn backward(
        &self,
        d_pooled: ArrayView1<T>,
        queries_from: ArrayView2<T>,
        keys_from: ArrayView2<T>,
        cache: &HeadCache<T>,
        grad: &mut AttentionHead<T>,
    ) -> (Array2<T>, Array2<T>) {
        let n_q = cache.attn.nrows();
        let inv_n = T::one() / T::from_usize(n_q).unwrap();
        let d_out = d_pooled
            .insert_axis(Axis(0))
            .broadcast((n_q, d_pooled.len()))
            .unwrap()
            .mapv(|g| g * inv_n);

        let d_attn = d_out.dot(&cache.v.t());
        let d_v = cache.attn.t().dot(&d_out);

        // softmax Jacobian, row by row
        let mut d_scores = d_attn;
        Zip::from(d_scores.rows_mut())
            .and(cache.attn.rows())
            .for_each(|mut ds, p| {
                let inner: T = ds.iter().zip(p.iter()).map(|(&a, &b)| a * b).sum();
                Zip::from(&mut ds).and(&p).for_each(|d, &pv| *d = pv * (*d - inner));
            });
        let c = self.scale();
        let d_q = d_scores.dot(&cache.k) * c;
        let d_k = d_scores.t().dot(&cache.q) * c;

        grad.query += &queries_from.t().dot(&d_q);
        grad.key += &keys_from.t().dot(&d_k);
        grad.value += &keys_from.t().dot(&d_v);

        let dx_q = d_q.dot(&self.query.t());
        let dx_kv = d_k.dot(&self.key.t()) + d_v.dot(&self.value.t());
        (dx_q, dx_kv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention<T> {
    pub audio_proj: Dense<T>,
    pub text_proj: Dense<T>,
    /// Audio queries over text keys/values.
    pub audio_to_text: AttentionHead<T>,
    /// Text queries over audio keys/values.
    pub text_to_audio: AttentionHead<T>,
}

/// Intermediate values of [`CrossAttention::forward`] needed for backprop.
#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    audio_in: Array2<T>,
    text_in: Array2<T>,
    audio: Array2<T>,
    text: Array2<T>,
    a2t: HeadCache<T>,
    t2a: HeadCache<T>,
}

impl<T: Scalar> CrossAttention<T> {
    pub fn zeros(d_audio: usize, d_text: usize, d_model: usize) -> Self {
        CrossAttention {
            audio_proj: Dense::zeros(d_audio, d_model),
            text_proj: Dense::zeros(d_text, d_model),
            audio_to_text: AttentionHead::zeros(d_model),
            text_to_audio: AttentionHead::zeros(d_model),
        }
    }

    pub fn init(d_audio: usize, d_text: usize, d_model: usize, rng: &mut impl Rng) -> Self {
        CrossAttention {
            audio_proj: Dense::glorot(d_audio, d_model, rng),
            text_proj: Dense::glorot(d_text, d_model, rng),
            audio_to_text: AttentionHead::glorot(d_model, rng),
            text_to_audio: AttentionHead::glorot(d_model, rng),
        }
    }

    pub fn d_model(&self) -> usize {
        self.audio_proj.d_out()
    }

    pub fn d_audio(&self) -> usize {
        self.audio_proj.d_in()
    }

    pub fn d_text(&self) -> usize {
        self.text_proj.d_in()
    }

    /// Output width: both pooled directions concatenated.
    pub fn d_out(&self) -> usize {
        2 * self.d_model()
    }

    pub fn forward(&self, audio: ArrayView2<T>, text: ArrayView2<T>) -> Result<(Array1<T>, AttentionCache<T>)> {
        if audio.nrows() == 0 || text.nrows() == 0 {
            return Err(Error::Sequence(format!(
                "cross-attention needs non-empty sequences, got {} audio and {} text rows",
                audio.nrows(),
                text.nrows()
            )));
        }
        if audio.ncols() != self.d_audio() || text.ncols() != self.d_text() {
            return Err(Error::Shape(format!(
                "cross-attention expects dims ({}, {}), got ({}, {})",
                self.d_audio(),
                self.d_text(),
                audio.ncols(),
                text.ncols()
            )));
        }
        if audio.iter().chain(text.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("cross-attention input".into()));
        }
        let a = self.audio_proj.forward(audio);
        let t = self.text_proj.forward(text);
        let (o1, a2t) = self.audio_to_text.forward(a.view(), t.view());
        let (o2, t2a) = self.text_to_audio.forward(t.view(), a.view());
        let fused = concatenate![Axis(0), o1, o2];
        Ok((
            fused,
            AttentionCache {
                audio_in: audio.to_owned(),
                text_in: text.to_owned(),
                audio: a,
                text: t,
                a2t,
                t2a,
            },
        ))
    }

    /// Accumulates the gradient of `d_fused · fused` into `grad`.
    pub fn backward(&self, cache: &AttentionCache<T>, d_fused: ArrayView1<T>, grad: &mut CrossAttention<T>) {
        let d = self.d_model();
        let (da_1, dt_1) = self.audio_to_text.backward(
            d_fused.slice(s![..d]),
            cache.audio.view(),
            cache.text.view(),
            &cache.a2t,
            &mut grad.audio_to_text,
        );
        let (dt_2, da_2) = self.text_to_audio.backward(
            d_fused.slice(s![d..]),
            cache.text.view(),
            cache.audio.view(),
            &cache.t2a,
            &mut grad.text_to_audio,
        );
        let da = da_1 + da_2;
        let dt = dt_1 + dt_2;
        self.audio_proj
            .backward(cache.audio_in.view(), da.view(), &mut grad.audio_proj, false);
        self.text_proj
            .backward(cache.text_in.view(), dt.view(), &mut grad.text_proj, false);
    }
}

/// Fused `[audio ⟶ text ‖ text ⟶ audio]` vector of length `2 * d_model`.
pub fn cross_attend<T: Scalar>(
    audio_seq: ArrayView2<T>,
    text_seq: ArrayView2<T>,
    params: &CrossAttention<T>,
) -> Result<Array1<T>> {
    params.forward(audio_seq, text_seq).map(|(v, _)| v)
}

/// Concatenation fusion `[audio ‖ text]`.
pub fn concat_fuse<T: Scalar>(audio: &[T], text: &[T]) -> Result<Vec<T>> {
    if audio.iter().chain(text).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("fusion input".into()));
    }
    Ok(audio.iter().chain(text).copied().collect())
}

/// Row mean of a `[n, d]` sequence.
pub fn pool_sequence<T: Scalar>(seq: ArrayView2<T>) -> Result<Array1<T>> {
    seq.mean_axis(Axis(0))
        .filter(|_| seq.nrows() > 0)
        .ok_or_else(|| Error::Sequence("cannot pool an empty sequence".into()))
}

impl<T: Scalar> Params<T> for AttentionHead<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![slice2(&self.query), slice2(&self.key), slice2(&self.value)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            slice2_mut(&mut self.query),
            slice2_mut(&mut self.key),
            slice2_mut(&mut self.value),
        ]
    }

    fn zeros_like(&self) -> Self {
        AttentionHead::zeros(self.query.nrows())
    }
}

impl<T: Scalar> Params<T> for CrossAttention<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.audio_proj.tensors();
        v.extend(self.text_proj.tensors());
        v.extend(self.audio_to_text.tensors());
        v.extend(self.text_to_audio.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.audio_proj.tensors_mut();
        v.extend(self.text_proj.tensors_mut());
        v.extend(self.audio_to_text.tensors_mut());
        v.extend(self.text_to_audio.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        CrossAttention {
            audio_proj: self.audio_proj.zeros_like(),
            text_proj: self.text_proj.zeros_like(),
            audio_to_text: self.audio_to_text.zeros_like(),
            text_to_audio: self.text_to_audio.zeros_like(),
        }
    }
}
