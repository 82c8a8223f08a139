//! Local Neighborhood Similarity: Jaccard overlap of a word's K-nearest
//! neighbors in two embedding spaces.

use std::collections::{BTreeMap, HashSet};
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{check_k, knn, knn_indices};
use super::space::{aggregate_rows, restrict_to_shared, EmbeddingSpace, Side};
use crate::error::{Error, Result};
use crate::pooling::AweStore;
use crate::scalar::Scalar;

/// Neighbor counts used when none are given.
pub const DEFAULT_KS: [usize; 4] = [5, 10, 25, 50];

/// `|a ∩ b| / |a ∪ b|` over the distinct elements of each input.
pub fn jaccard<K, A, B>(a: A, b: B) -> Result<f64>
where
    K: Eq + Hash,
    A: IntoIterator<Item = K>,
    B: IntoIterator<Item = K>,
{
    let a: HashSet<K> = a.into_iter().collect();
    let b: HashSet<K> = b.into_iter().collect();
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return Err(Error::UndefinedJaccard);
    }
    Ok(inter as f64 / union as f64)
}

/// LNS of one word: Jaccard overlap of its `k` neighbors in each space.
/// Both spaces should already be restricted to their shared vocabulary.
pub fn lns<T: Scalar>(word: &str, acoustic: &EmbeddingSpace<T>, lexical: &EmbeddingSpace<T>, k: usize) -> Result<f64> {
    let a = knn(word, acoustic, k)?;
    let b = knn(word, lexical, k)?;
    jaccard(a.words(), b.words())
}

/// Jaccard of two equally long index lists without duplicates.
fn prefix_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Mean LNS over the shared vocabulary of two spaces, one value per `k`.
/// Returns the shared vocabulary size alongside.
pub fn mean_lns<T: Scalar>(a: &EmbeddingSpace<T>, b: &EmbeddingSpace<T>, ks: &[usize]) -> Result<(usize, Vec<f64>)> {
    let (ra, rb) = restrict_to_shared(a, b)?;
    let n = ra.len();
    let kmax = ks.iter().copied().max().ok_or_else(|| Error::Parameter("no K values".into()))?;
    for &k in ks {
        check_k(&ra, k)?;
    }
    let per_word: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let na: Vec<usize> = knn_indices(&ra, i, kmax).into_iter().map(|(_, j)| j).collect();
            let nb: Vec<usize> = knn_indices(&rb, i, kmax).into_iter().map(|(_, j)| j).collect();
            ks.iter().map(|&k| prefix_jaccard(&na[..k], &nb[..k])).collect()
        })
        .collect();
    let means = (0..ks.len())
        .map(|c| per_word.iter().map(|row| row[c]).sum::<f64>() / n as f64)
        .collect();
    Ok((n, means))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnsRow {
    pub layer: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean_lns: f64,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnsReport {
    pub ks: Vec<usize>,
    /// Ordered by `(layer, K)`.
    pub rows: Vec<LnsRow>,
}

impl LnsReport {
    pub fn per_layer(&self) -> BTreeMap<usize, BTreeMap<usize, f64>> {
        let mut out: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.layer).or_default().insert(r.k, r.mean_lns);
        }
        out
    }

    pub fn vocab_size(&self, layer: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.layer == layer).map(|r| r.vocab_size)
    }
}

/// Mean LNS per layer and `K` between each stored layer and the lexical side.
pub fn lns_layer_report(store: &AweStore, ks: &[usize], min_count: usize) -> Result<LnsReport> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let lexical: EmbeddingSpace<f64> = aggregate_rows(Side::Lexical, store.words(), &store.lexical, min_count)?;
    let layers: Vec<usize> = store.layers.keys().copied().collect();
    let per_layer: Vec<Vec<LnsRow>> = layers
        .par_iter()
        .map(|&layer| {
            let acoustic: EmbeddingSpace<f64> =
                aggregate_rows(Side::Acoustic { layer }, store.words(), store.layer(layer)?, min_count)?;
            let (vocab_size, means) = mean_lns(&acoustic, &lexical, &ks)?;
            Ok(ks
                .iter()
                .zip(means)
                .map(|(&k, mean_lns)| LnsRow {
                    layer,
                    k,
                    mean_lns,
                    vocab_size,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(LnsReport {
        ks,
        rows: per_layer.into_iter().flatten().collect(),
    })
}
