//! Corpus-wide AWE store: one `[n_rows, dim]` tensor per layer, a row index,
//! and the matching lexical occurrence vectors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::builder::{build_awes, pool_word, LayeredUtterance};
use super::span::FrameGrid;
use crate::error::{Error, Result};
use crate::store::manifest::{resolve, Manifest, UtteranceEntry};
use crate::store::{read_alignments, read_tensor, tensor::write_tensor_file, Tensor};

pub const INDEX_FILE: &str = "index.csv";
pub const META_FILE: &str = "store.json";
pub const LEXICAL_FILE: &str = "lexical.awet";

pub fn layer_file(layer: usize) -> String {
    format!("layer_{layer:02}.awet")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRow {
    pub row: usize,
    pub utterance_id: String,
    pub word: String,
    pub token_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreMeta {
    corpus_name: String,
    layers: Vec<usize>,
    n_rows: usize,
    dim: usize,
    lexical_dim: usize,
}

/// Word-occurrence rows shared by every layer tensor and the lexical tensor.
#[derive(Debug, Clone)]
pub struct AweStore {
    pub corpus_name: String,
    pub index: Vec<IndexRow>,
    /// `layer -> [n_rows, dim]`
    pub layers: BTreeMap<usize, Tensor>,
    /// `[n_rows, lexical_dim]`, occurrence-level lexical vectors (sub-tokens averaged).
    pub lexical: Tensor,
}

struct UtteranceRows {
    index: Vec<(String, usize)>,
    per_layer: Vec<Vec<f32>>,
    lexical: Vec<f32>,
}

/// Mean of the lexical rows belonging to each transcript word.
pub fn lexical_word_vectors(entry: &UtteranceEntry, lexical: &Tensor) -> Result<BTreeMap<usize, Vec<f32>>> {
    if lexical.dims().len() != 2 {
        return Err(Error::Shape(format!(
            "lexical tensor must be 2-D, got {:?}",
            lexical.dims()
        )));
    }
    let n_rows = lexical.dims()[0];
    let map = entry.lexical_rows_to_words(n_rows);
    if map.len() != n_rows {
        return Err(Error::Shape(format!(
            "lexical_word_map has {} entries for {n_rows} rows",
            map.len()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<&[f32]>> = BTreeMap::new();
    for (row, word) in map.iter().enumerate() {
        if let Some(w) = word {
            groups.entry(*w).or_default().push(lexical.row(row));
        }
    }
    groups
        .into_iter()
        .map(|(w, rows)| Ok((w, pool_word(&rows)?)))
        .collect()
}

fn utterance_rows(
    entry: &UtteranceEntry,
    root: &Path,
    layers: &[usize],
    grid: FrameGrid,
) -> Result<UtteranceRows> {
    let utt = LayeredUtterance::load(entry, root)?;
    let alignments = read_alignments(resolve(root, &entry.alignment_path))?;
    let lexical = read_tensor(resolve(root, &entry.lexical_tensor_path))?;
    let lex_words = lexical_word_vectors(entry, &lexical)?;

    let records = build_awes(&utt, &alignments, layers, grid)?;
    let mut out = UtteranceRows {
        index: Vec::new(),
        per_layer: vec![Vec::new(); layers.len()],
        lexical: Vec::new(),
    };
    for occurrence in records.chunks(layers.len()) {
        let head = &occurrence[0];
        let Some(lex) = lex_words.get(&head.token_index) else {
            log::warn!(
                "utterance {}: word {:?} (token {}) has no lexical rows; skipped",
                entry.id,
                head.word,
                head.token_index
            );
            continue;
        };
        out.index.push((head.word.clone(), head.token_index));
        for (slot, rec) in out.per_layer.iter_mut().zip(occurrence) {
            slot.extend_from_slice(&rec.vector);
        }
        out.lexical.extend_from_slice(lex);
    }
    Ok(out)
}

impl AweStore {
    /// Pools every aligned word of the corpus at the requested layers.
    /// Utterances are processed in parallel and merged in id order.
    pub fn build(manifest: &Manifest, root: &Path, layers: &[usize]) -> Result<Self> {
        let mut layers = layers.to_vec();
        layers.sort_unstable();
        layers.dedup();
        if layers.is_empty() {
            return Err(Error::Parameter("no layers requested".into()));
        }
        let grid = FrameGrid::new(manifest.frame_stride_s, manifest.frame_window_s)?;
        let mut entries: Vec<&UtteranceEntry> = manifest.utterances.iter().collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));

        let per_utt: Vec<(String, UtteranceRows)> = entries
            .par_iter()
            .map(|e| {
                utterance_rows(e, root, &layers, grid)
                    .map(|rows| (e.id.clone(), rows))
                    .map_err(|err| err.context(format!("utterance {}", e.id)))
            })
            .collect::<Result<_>>()?;

        let mut index = Vec::new();
        let mut per_layer = vec![Vec::new(); layers.len()];
        let mut lexical = Vec::new();
        for (id, rows) in per_utt {
            for (word, token_index) in rows.index {
                index.push(IndexRow {
                    row: index.len(),
                    utterance_id: id.clone(),
                    word,
                    token_index,
                });
            }
            for (dst, src) in per_layer.iter_mut().zip(rows.per_layer) {
                dst.extend(src);
            }
            lexical.extend(rows.lexical);
        }
        let n_rows = index.len();
        if n_rows == 0 {
            return Err(Error::Parameter("corpus has no aligned words".into()));
        }
        let mut tensors = BTreeMap::new();
        for (&layer, data) in layers.iter().zip(per_layer) {
            let dim = data.len() / n_rows;
            tensors.insert(layer, Tensor::new(vec![n_rows, dim], data)?);
        }
        let lex_dim = lexical.len() / n_rows;
        Ok(AweStore {
            corpus_name: manifest.corpus_name.clone(),
            index,
            layers: tensors,
            lexical: Tensor::new(vec![n_rows, lex_dim], lexical)?,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.index.len()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.index.iter().map(|r| r.word.as_str())
    }

    pub fn layer(&self, layer: usize) -> Result<&Tensor> {
        self.layers.get(&layer).ok_or(Error::Layer {
            layer,
            n_layers: self.layers.len(),
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (&layer, t) in &self.layers {
            write_tensor_file(t, dir.join(layer_file(layer)))?;
        }
        write_tensor_file(&self.lexical, dir.join(LEXICAL_FILE))?;

        let index_path = dir.join(INDEX_FILE);
        let mut w = csv::Writer::from_path(&index_path).map_err(|e| csv_err(&index_path, e))?;
        for row in &self.index {
            w.serialize(row).map_err(|e| csv_err(&index_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&index_path, e))?;

        let meta = StoreMeta {
            corpus_name: self.corpus_name.clone(),
            layers: self.layers.keys().copied().collect(),
            n_rows: self.n_rows(),
            dim: self.layers.values().next().map_or(0, |t| t.dims()[1]),
            lexical_dim: self.lexical.dims()[1],
        };
        let meta_path = dir.join(META_FILE);
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
    }

    /// Loads a store directory. `lexical` overrides the store's own lexical
    /// tensor; its rows must line up with the index.
    pub fn load(dir: impl AsRef<Path>, lexical: Option<&Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;

        let index_path = dir.join(INDEX_FILE);
        let mut r = csv::Reader::from_path(&index_path).map_err(|e| csv_err(&index_path, e))?;
        let index: Vec<IndexRow> = r
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| csv_err(&index_path, e))?;
        if index.len() != meta.n_rows || index.iter().enumerate().any(|(i, r)| r.row != i) {
            return Err(Error::Format(format!(
                "{}: expected rows 0..{}",
                index_path.display(),
                meta.n_rows
            )));
        }

        let mut layers = BTreeMap::new();
        for &layer in &meta.layers {
            let t = read_tensor(dir.join(layer_file(layer)))?;
            check_rows(&t, meta.n_rows, &layer_file(layer))?;
            layers.insert(layer, t);
        }
        let lex_path = lexical.map_or_else(|| dir.join(LEXICAL_FILE), Path::to_path_buf);
        let lexical = read_tensor(&lex_path)?;
        check_rows(&lexical, meta.n_rows, &lex_path.display().to_string())?;
        Ok(AweStore {
            corpus_name: meta.corpus_name,
            index,
            layers,
            lexical,
        })
    }
}

fn check_rows(t: &Tensor, n_rows: usize, what: &str) -> Result<()> {
    if t.dims().len() != 2 || t.dims()[0] != n_rows {
        return Err(Error::Format(format!(
            "{what}: expected [{n_rows}, dim], got {:?}",
            t.dims()
        )));
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}
