//! Exact cosine nearest-neighbor search.

use std::cmp::Ordering;

use serde::Serialize;

use super::space::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub(crate) fn norm<T: Scalar>(u: &[T]) -> T {
    dot(u, u).sqrt()
}

#[inline]
pub(crate) fn cosine_with_norms<T: Scalar>(u: &[T], v: &[T], nu: T, nv: T) -> T {
    (dot(u, v) / (nu * nv)).max(-T::one()).min(T::one())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of dims {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::DegenerateVector("cosine argument".into()));
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

/// Neighbors of one word, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborSet<T> {
    pub word: String,
    pub neighbors: Vec<(String, T)>,
}

impl<T> NeighborSet<T> {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.neighbors.iter().map(|(w, _)| w.as_str())
    }
}

/// Higher score first; equal scores by word index, i.e. lexicographically.
#[inline]
fn rank<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Indices and scores of the `k` nearest other words of word `idx`.
pub(crate) fn knn_indices<T: Scalar>(space: &EmbeddingSpace<T>, idx: usize, k: usize) -> Vec<(T, usize)> {
    let q = space.row(idx);
    let nq = space.norm_at(idx);
    let mut scored: Vec<(T, usize)> = (0..space.len())
        .filter(|&j| j != idx)
        .map(|j| (cosine_with_norms(q, space.row(j), nq, space.norm_at(j)), j))
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank);
    scored
}

pub(crate) fn check_k<T: Scalar>(space: &EmbeddingSpace<T>, k: usize) -> Result<()> {
    if k == 0 || k + 1 > space.len() {
        return Err(Error::Parameter(format!(
            "K = {k} outside [1, {}] for a vocabulary of {}",
            space.len().saturating_sub(1),
            space.len()
        )));
    }
    Ok(())
}

/// The `k` other words with the highest cosine to `word`.
pub fn knn<T: Scalar>(word: &str, space: &EmbeddingSpace<T>, k: usize) -> Result<NeighborSet<T>> {
    let idx = space
        .index_of(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    check_k(space, k)?;
    Ok(NeighborSet {
        word: word.to_string(),
        neighbors: knn_indices(space, idx, k)
            .into_iter()
            .map(|(s, j)| (space.words()[j].clone(), s))
            .collect(),
    })
}
