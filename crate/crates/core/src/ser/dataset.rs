use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use super::config::{ExperimentConfig, Feature, Fusion, TextVector};
use crate::error::{Error, Result};
use crate::nn::Input;
use crate::pooling::{build_awes, FrameGrid, LayeredUtterance};
use crate::store::manifest::resolve;
use crate::store::{read_alignments, read_tensor, Manifest, Tensor, UtteranceEntry, WordAlignment};

/// Every stream of one utterance, loaded once and shared by all runs.
#[derive(Debug, Clone)]
pub struct CorpusUtterance {
    pub entry: UtteranceEntry,
    pub label: usize,
    pub audio: LayeredUtterance,
    pub mel: Option<Tensor>,
    pub lexical: Tensor,
    pub alignments: Vec<WordAlignment>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: Manifest,
    pub root: PathBuf,
    pub grid: FrameGrid,
    /// Sorted by utterance id.
    pub utterances: Vec<CorpusUtterance>,
}

impl Corpus {
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        let manifest = Manifest::load(path)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Corpus::from_manifest(manifest, root)
    }

    pub fn from_manifest(manifest: Manifest, root: PathBuf) -> Result<Self> {
        let grid = FrameGrid::new(manifest.frame_stride_s, manifest.frame_window_s)?;
        let mut utterances = manifest
            .utterances
            .par_iter()
            .map(|entry| load_utterance(&manifest, &root, entry).map_err(|e| e.context(format!("utterance {}", entry.id))))
            .collect::<Result<Vec<_>>>()?;
        utterances.sort_by(|a, b| a.entry.id.cmp(&b.entry.id));
        Ok(Corpus {
            manifest,
            root,
            grid,
            utterances,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.label_set.len()
    }

    /// Layers available to a feature; Mel is a single-layer stream.
    pub fn n_layers(&self, feature: Feature) -> usize {
        match feature {
            Feature::Mel => 1,
            Feature::Raw | Feature::Awe => self.manifest.n_layers,
        }
    }
}

fn load_utterance(manifest: &Manifest, root: &Path, entry: &UtteranceEntry) -> Result<CorpusUtterance> {
    let label = manifest
        .label_index(&entry.label)
        .ok_or_else(|| Error::Config(format!("label {:?} is not in the label set", entry.label)))?;
    let audio = LayeredUtterance::load(entry, root)?;
    let mel = entry
        .mel_tensor_path
        .as_ref()
        .map(|p| read_tensor(resolve(root, p)))
        .transpose()?;
    let lexical = read_tensor(resolve(root, &entry.lexical_tensor_path))?;
    if lexical.dims().len() != 2 {
        return Err(Error::Shape(format!("lexical tensor must be 2-D, got {:?}", lexical.dims())));
    }
    let alignments = read_alignments(resolve(root, &entry.alignment_path))?;
    Ok(CorpusUtterance {
        entry: entry.clone(),
        label,
        audio,
        mel,
        lexical,
        alignments,
    })
}

/// Classifier inputs for one (feature, fusion, layer) setting.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub examples: Vec<(Input<f32>, usize)>,
    pub n_classes: usize,
    /// Utterances left out, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

fn rows_to_array(rows: &[&[f32]]) -> Array2<f32> {
    let dim = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), dim), flat).expect("rows share a width")
}

fn tensor_layer(t: &Tensor, layer: usize) -> Result<Array2<f32>> {
    let dims = t.dims();
    if dims.len() != 3 {
        return Err(Error::Shape(format!("expected a 3-D stream, got {:?}", dims)));
    }
    if layer >= dims[0] {
        return Err(Error::Layer { layer, n_layers: dims[0] });
    }
    Ok(Array2::from_shape_vec((dims[1], dims[2]), t.layer(layer).to_vec()).expect("layer slice shape"))
}

fn mean_rows(a: &Array2<f32>) -> Array1<f32> {
    a.mean_axis(Axis(0)).expect("non-empty sequence")
}

enum Prepared {
    Example(Input<f32>),
    Skip(String),
}

fn prepare(utt: &CorpusUtterance, config: &ExperimentConfig, layer: usize, grid: FrameGrid) -> Result<Prepared> {
    let audio = match config.feature {
        Feature::Raw => tensor_layer(&utt.audio.tensor, layer)?,
        Feature::Mel => {
            let mel = utt
                .mel
                .as_ref()
                .ok_or_else(|| Error::Config("no mel_tensor_path for this utterance".into()))?;
            tensor_layer(mel, 0)?
        }
        Feature::Awe => {
            let records = build_awes(&utt.audio, &utt.alignments, &[layer], grid)?;
            let rows: Vec<&[f32]> = records.iter().map(|r| r.vector.as_slice()).collect();
            rows_to_array(&rows)
        }
    };
    if audio.nrows() == 0 {
        return Ok(Prepared::Skip(match config.feature {
            Feature::Awe => "no aligned words".into(),
            _ => "no frames".into(),
        }));
    }
    if config.fusion == Fusion::None {
        return Ok(Prepared::Example(Input::Vector(mean_rows(&audio))));
    }

    let map = utt.entry.lexical_rows_to_words(utt.lexical.dims()[0]);
    let word_rows: Vec<&[f32]> = map
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_some())
        .map(|(i, _)| utt.lexical.row(i))
        .collect();
    if word_rows.is_empty() {
        return Ok(Prepared::Skip("no word-piece rows in the lexical tensor".into()));
    }
    let text = rows_to_array(&word_rows);
    Ok(Prepared::Example(match config.fusion {
        Fusion::Concat => {
            let t = match config.text_vector {
                TextVector::TokenMean => mean_rows(&text),
                TextVector::First => Array1::from(utt.lexical.row(0).to_vec()),
            };
            let mut v = mean_rows(&audio).to_vec();
            v.extend(t.iter());
            Input::Vector(Array1::from(v))
        }
        Fusion::CrossAttention => Input::Pair { audio, text },
        Fusion::None => unreachable!(),
    }))
}

/// One example per utterance, in corpus order. Utterances without words
/// (or without text, when fusing) are skipped with a warning.
pub fn assemble_dataset(corpus: &Corpus, config: &ExperimentConfig, layer: usize) -> Result<Dataset> {
    let n_layers = corpus.n_layers(config.feature);
    if layer >= n_layers {
        return Err(Error::Layer { layer, n_layers });
    }
    let prepared = corpus
        .utterances
        .par_iter()
        .map(|u| prepare(u, config, layer, corpus.grid).map_err(|e| e.context(format!("utterance {}", u.entry.id))))
        .collect::<Result<Vec<_>>>()?;

    let mut ds = Dataset {
        ids: Vec::new(),
        examples: Vec::new(),
        n_classes: corpus.n_classes(),
        skipped: Vec::new(),
    };
    for (utt, p) in corpus.utterances.iter().zip(prepared) {
        match p {
            Prepared::Example(input) => {
                ds.ids.push(utt.entry.id.clone());
                ds.examples.push((input, utt.label));
            }
            Prepared::Skip(reason) => {
                log::warn!("utterance {} skipped: {reason}", utt.entry.id);
                ds.skipped.push((utt.entry.id.clone(), reason));
            }
        }
    }
    if let Some((first, _)) = ds.examples.first() {
        let width = |i: &Input<f32>| match i {
            Input::Vector(v) => (v.len(), 0),
            Input::Pair { audio, text } => (audio.ncols(), text.ncols()),
        };
        let w = width(first);
        if let Some(pos) = ds.examples.iter().position(|(i, _)| width(i) != w) {
            return Err(Error::Shape(format!(
                "utterance {} has feature width {:?}, expected {:?}",
                ds.ids[pos],
                width(&ds.examples[pos].0),
                w
            )));
        }
    }
    Ok(ds)
}

/// Per-dimension z-scoring fitted on training inputs. Dimensions with
/// (near) zero spread are only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    primary: (Array1<f32>, Array1<f32>),
    text: Option<(Array1<f32>, Array1<f32>)>,
}

fn moments<'a>(rows: impl Iterator<Item = ndarray::ArrayView1<'a, f32>>, dim: usize) -> (Array1<f32>, Array1<f32>) {
    let mut n = 0usize;
    let mut sum = vec![0f64; dim];
    let mut sq = vec![0f64; dim];
    for r in rows {
        n += 1;
        for (j, &x) in r.iter().enumerate() {
            sum[j] += x as f64;
            sq[j] += x as f64 * x as f64;
        }
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let scale: Vec<f32> = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let sd = (q / n - m * m).max(0.0).sqrt();
            if sd > 1e-6 {
                sd as f32
            } else {
                1.0
            }
        })
        .collect();
    (mean.into_iter().map(|m| m as f32).collect(), Array1::from(scale))
}

impl Standardizer {
    pub fn fit(examples: &[(Input<f32>, usize)]) -> Result<Self> {
        let (first, _) = examples
            .first()
            .ok_or_else(|| Error::Parameter("cannot standardize an empty set".into()))?;
        Ok(match first {
            Input::Vector(v) => Standardizer {
                primary: moments(examples.iter().filter_map(|(i, _)| i.as_vector()), v.len()),
                text: None,
            },
            Input::Pair { audio, text } => {
                let rows = |pick: fn(&Input<f32>) -> Option<&Array2<f32>>| {
                    examples
                        .iter()
                        .filter_map(move |(i, _)| pick(i))
                        .flat_map(|a| a.rows().into_iter())
                };
                Standardizer {
                    primary: moments(rows(|i| match i {
                        Input::Pair { audio, .. } => Some(audio),
                        _ => None,
                    }), audio.ncols()),
                    text: Some(moments(rows(|i| match i {
                        Input::Pair { text, .. } => Some(text),
                        _ => None,
                    }), text.ncols())),
                }
            }
        })
    }

    pub fn apply(&self, input: &mut Input<f32>) {
        let (m, s) = &self.primary;
        match input {
            Input::Vector(v) => {
                *v -= m;
                *v /= s;
            }
            Input::Pair { audio, text } => {
                *audio -= m;
                *audio /= s;
                if let Some((tm, ts)) = &self.text {
                    *text -= tm;
                    *text /= ts;
                }
            }
        }
    }
}
