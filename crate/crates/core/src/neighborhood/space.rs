use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::knn::norm;
use crate::error::{Error, Result};
use crate::pooling::{pool_word, AweRecord};
use crate::scalar::Scalar;
use crate::store::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Acoustic { layer: usize },
    Lexical,
}

/// Word type -> vector map. Words are kept in lexicographic order, so word
/// indices double as the tie-break order for neighbor search.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace<T> {
    side: Side,
    dim: usize,
    words: Vec<String>,
    vectors: Vec<T>,
    norms: Vec<T>,
    lookup: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingSpace<T> {
    /// Rejects duplicate words, ragged dimensions, non-finite entries, and zero vectors.
    pub fn new<I, V>(side: Side, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, V)>,
        V: AsRef<[T]>,
    {
        let mut sorted: BTreeMap<String, Vec<T>> = BTreeMap::new();
        for (word, v) in entries {
            if sorted.contains_key(&word) {
                return Err(Error::Parameter(format!("duplicate word type {word:?}")));
            }
            sorted.insert(word, v.as_ref().to_vec());
        }
        let dim = sorted.values().next().map_or(0, Vec::len);
        let mut words = Vec::with_capacity(sorted.len());
        let mut vectors = Vec::with_capacity(sorted.len() * dim);
        let mut norms = Vec::with_capacity(sorted.len());
        for (word, v) in sorted {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "word {word:?} has dim {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("vector of {word:?}")));
            }
            let n = norm(&v);
            if n == T::zero() {
                return Err(Error::DegenerateVector(word));
            }
            norms.push(n);
            vectors.extend(v);
            words.push(word);
        }
        let lookup = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(EmbeddingSpace {
            side,
            dim,
            words,
            vectors,
            norms,
            lookup,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Word types in lexicographic order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[T]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn norm_at(&self, i: usize) -> T {
        self.norms[i]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), self.row(i)))
    }

    /// Sub-space holding only the words accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Self {
        let mut out = EmbeddingSpace {
            side: self.side,
            dim: self.dim,
            words: Vec::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
            lookup: HashMap::new(),
        };
        for (i, w) in self.words.iter().enumerate() {
            if keep(w) {
                out.lookup.insert(w.clone(), out.words.len());
                out.words.push(w.clone());
                out.vectors.extend_from_slice(self.row(i));
                out.norms.push(self.norms[i]);
            }
        }
        out
    }

    /// Same words and side, every vector passed through `f`.
    pub fn map_vectors(&self, f: impl Fn(&str, &[T]) -> Vec<T>) -> Result<Self> {
        EmbeddingSpace::new(self.side, self.entries().map(|(w, v)| (w.to_string(), f(w, v))))
    }
}

/// Both spaces cut down to their common vocabulary. The restricted spaces
/// share word indices.
pub fn restrict_to_shared<T: Scalar>(
    a: &EmbeddingSpace<T>,
    b: &EmbeddingSpace<T>,
) -> Result<(EmbeddingSpace<T>, EmbeddingSpace<T>)> {
    let ra = a.restrict(|w| b.contains(w));
    let rb = b.restrict(|w| a.contains(w));
    if ra.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok((ra, rb))
}

fn aggregate<'a, T: Scalar>(
    side: Side,
    occurrences: impl Iterator<Item = (&'a str, &'a [f32])>,
    min_count: usize,
) -> Result<EmbeddingSpace<T>> {
    let mut groups: BTreeMap<&str, Vec<Vec<T>>> = BTreeMap::new();
    for (word, v) in occurrences {
        groups
            .entry(word)
            .or_default()
            .push(v.iter().map(|&x| T::lit(x as f64)).collect());
    }
    let entries = groups
        .into_iter()
        .filter(|(_, occ)| occ.len() >= min_count.max(1))
        .map(|(w, occ)| Ok((w.to_string(), pool_word(&occ)?)))
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    EmbeddingSpace::new(side, entries)
}

/// One vector per word type: the mean over its occurrence AWEs, keeping types
/// seen at least `min_count` times.
pub fn aggregate_word_types<T: Scalar>(records: &[AweRecord], min_count: usize) -> Result<EmbeddingSpace<T>> {
    let layer = records.first().ok_or(Error::EmptyVocabulary)?.layer;
    if let Some(r) = records.iter().find(|r| r.layer != layer) {
        return Err(Error::Parameter(format!(
            "records mix layers {layer} and {}",
            r.layer
        )));
    }
    aggregate(
        Side::Acoustic { layer },
        records.iter().map(|r| (r.word.as_str(), r.vector.as_slice())),
        min_count,
    )
}

/// Like [`aggregate_word_types`] for a `[n_rows, dim]` occurrence tensor with
/// one word label per row.
pub fn aggregate_rows<'a, T: Scalar>(
    side: Side,
    words: impl IntoIterator<Item = &'a str>,
    rows: &'a Tensor,
    min_count: usize,
) -> Result<EmbeddingSpace<T>> {
    if rows.dims().len() != 2 {
        return Err(Error::Shape(format!("expected 2-D rows, got {:?}", rows.dims())));
    }
    let words: Vec<&str> = words.into_iter().collect();
    if words.len() != rows.dims()[0] {
        return Err(Error::Shape(format!(
            "{} words for {} rows",
            words.len(),
            rows.dims()[0]
        )));
    }
    aggregate(
        side,
        words.into_iter().enumerate().map(|(i, w)| (w, rows.row(i))),
        min_count,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(word: &str, v: Vec<f32>) -> AweRecord {
        AweRecord {
            word: word.into(),
            utterance_id: "u".into(),
            token_index: 0,
            layer: 3,
            vector: v,
            n_frames_pooled: 1,
        }
    }

    #[test]
    fn type_vector_is_occurrence_mean() {
        let recs = vec![rec("after", vec![1.0, 0.0]), rec("after", vec![0.0, 1.0])];
        let s: EmbeddingSpace<f64> = aggregate_word_types(&recs, 1).unwrap();
        assert_eq!(s.vector("after").unwrap(), &[0.5, 0.5]);
        assert_eq!(s.side(), Side::Acoustic { layer: 3 });
    }

    #[test]
    fn min_count_filters_rare_words() {
        let recs = vec![
            rec("a", vec![1.0, 0.0]),
            rec("a", vec![1.0, 1.0]),
            rec("b", vec![0.0, 1.0]),
            rec("c", vec![2.0, 1.0]),
        ];
        let s: EmbeddingSpace<f64> = aggregate_word_types(&recs, 1).unwrap();
        assert_eq!(s.len(), 3);
        let s: EmbeddingSpace<f64> = aggregate_word_types(&recs, 2).unwrap();
        assert_eq!(s.words(), &["a".to_string()]);
        assert!(matches!(
            aggregate_word_types::<f64>(&recs, 3),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn single_occurrences_pass_through() {
        let recs = vec![rec("x", vec![0.25, -1.5]), rec("y", vec![3.0, 4.0])];
        let s: EmbeddingSpace<f32> = aggregate_word_types(&recs, 1).unwrap();
        assert_eq!(s.vector("x").unwrap(), &[0.25, -1.5]);
        assert_eq!(s.vector("y").unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn construction_errors() {
        let zero = EmbeddingSpace::<f64>::new(
            Side::Lexical,
            vec![("ok".to_string(), vec![1.0, 0.0]), ("zero".to_string(), vec![0.0, 0.0])],
        );
        assert!(matches!(zero, Err(Error::DegenerateVector(w)) if w == "zero"));
        let ragged =
            EmbeddingSpace::<f64>::new(Side::Lexical, vec![("a".to_string(), vec![1.0]), ("b".to_string(), vec![1.0, 2.0])]);
        assert!(matches!(ragged, Err(Error::Shape(_))));
        let dup =
            EmbeddingSpace::<f64>::new(Side::Lexical, vec![("a".to_string(), vec![1.0]), ("a".to_string(), vec![2.0])]);
        assert!(matches!(dup, Err(Error::Parameter(_))));
        let mixed = vec![rec("a", vec![1.0]), AweRecord { layer: 4, ..rec("b", vec![1.0]) }];
        assert!(matches!(aggregate_word_types::<f64>(&mixed, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn shared_restriction_aligns_indices() {
        let a = EmbeddingSpace::<f64>::new(
            Side::Lexical,
            ["d", "a", "c"].map(|w| (w.to_string(), vec![1.0, 2.0])),
        )
        .unwrap();
        let b = EmbeddingSpace::<f64>::new(
            Side::Lexical,
            ["c", "b", "a"].map(|w| (w.to_string(), vec![2.0, 1.0])),
        )
        .unwrap();
        let (ra, rb) = restrict_to_shared(&a, &b).unwrap();
        assert_eq!(ra.words(), rb.words());
        assert_eq!(ra.words(), &["a".to_string(), "c".to_string()]);
    }
}
