use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::span::FrameGrid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::manifest::{resolve, UtteranceEntry};
use crate::store::{read_tensor, Tensor, WordAlignment};

/// One utterance's `[n_layers, n_frames, dim]` encoder output plus metadata.
#[derive(Debug, Clone)]
pub struct LayeredUtterance {
    pub id: String,
    pub label: String,
    pub transcript: String,
    pub tensor: Tensor,
}

impl LayeredUtterance {
    pub fn new(id: impl Into<String>, tensor: Tensor) -> Result<Self> {
        if tensor.dims().len() != 3 {
            return Err(Error::Shape(format!(
                "layered tensor must be 3-D, got {:?}",
                tensor.dims()
            )));
        }
        Ok(LayeredUtterance {
            id: id.into(),
            label: String::new(),
            transcript: String::new(),
            tensor,
        })
    }

    pub fn load(entry: &UtteranceEntry, root: &Path) -> Result<Self> {
        let tensor = read_tensor(resolve(root, &entry.audio_tensor_path))?;
        let mut utt = LayeredUtterance::new(&entry.id, tensor)?;
        utt.label = entry.label.clone();
        utt.transcript = entry.transcript.clone();
        Ok(utt)
    }

    pub fn n_layers(&self) -> usize {
        self.tensor.dims()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.tensor.dims()[1]
    }

    pub fn dim(&self) -> usize {
        self.tensor.dims()[2]
    }
}

/// A pooled acoustic word embedding for one word occurrence at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AweRecord {
    pub word: String,
    pub utterance_id: String,
    pub token_index: usize,
    pub layer: usize,
    pub vector: Vec<f32>,
    pub n_frames_pooled: usize,
}

/// Element-wise arithmetic mean of equally sized frame vectors.
///
/// The result is clamped into the per-element `[min, max]` of the inputs so
/// rounding never pushes the mean outside the frames' range.
pub fn pool_word<T: Scalar, F: AsRef<[T]>>(frames: &[F]) -> Result<Vec<T>> {
    let first = frames.first().ok_or(Error::EmptySpan)?.as_ref();
    let dim = first.len();
    let mut sum = vec![T::zero(); dim];
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for f in frames {
        let f = f.as_ref();
        if f.len() != dim {
            return Err(Error::Shape(format!(
                "ragged frames: expected dim {dim}, got {}",
                f.len()
            )));
        }
        for (j, &x) in f.iter().enumerate() {
            sum[j] += x;
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let n = T::from_usize(frames.len()).unwrap();
    Ok(sum
        .into_iter()
        .zip(lo.into_iter().zip(hi))
        .map(|(s, (l, h))| (s / n).max(l).min(h))
        .collect())
}

/// One record per (aligned word, requested layer), ordered by `(token_index, layer)`.
pub fn build_awes(
    utterance: &LayeredUtterance,
    alignments: &[WordAlignment],
    layers: &[usize],
    grid: FrameGrid,
) -> Result<Vec<AweRecord>> {
    let layers: BTreeSet<usize> = layers.iter().copied().collect();
    let n_layers = utterance.n_layers();
    if let Some(&bad) = layers.iter().find(|&&l| l >= n_layers) {
        return Err(Error::Layer { layer: bad, n_layers }.context(format!("utterance {}", utterance.id)));
    }

    let mut ordered: Vec<&WordAlignment> = alignments.iter().collect();
    ordered.sort_by_key(|a| a.token_index);

    let mut records = Vec::with_capacity(ordered.len() * layers.len());
    for a in ordered {
        let word = a.word.to_lowercase();
        let ctx = || format!("utterance {} word {:?}", utterance.id, word);
        let span = grid
            .span(a.start_s, a.end_s, utterance.n_frames())
            .map_err(|e| e.context(ctx()))?;
        for &layer in &layers {
            let frames: Vec<&[f32]> = span
                .frames()
                .map(|i| utterance.tensor.frame(layer, i))
                .collect();
            let vector = pool_word(&frames).map_err(|e| e.context(ctx()))?;
            records.push(AweRecord {
                word: word.clone(),
                utterance_id: utterance.id.clone(),
                token_index: a.token_index,
                layer,
                vector,
                n_frames_pooled: span.len(),
            });
        }
    }
    Ok(records)
}
