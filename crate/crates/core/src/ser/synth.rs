use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::manifest::{DEFAULT_FRAME_STRIDE_S, DEFAULT_FRAME_WINDOW_S, SCHEMA_VERSION};
use crate::store::tensor::write_tensor;
use crate::store::{write_alignments, Manifest, UtteranceEntry, WordAlignment};

/// Where the class signal lives across encoder layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSignal {
    /// Full class signal at every layer.
    Uniform,
    /// Class signal at this layer only.
    Planted(usize),
    /// Explicit per-layer scale.
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_utterances: usize,
    pub n_layers: usize,
    pub dim: usize,
    pub lexical_dim: usize,
    pub n_mels: usize,
    pub vocab_size: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub noise_std: f64,
    /// Distance between class centroids in units of `noise_std`.
    pub separation: f64,
    /// Spread of per-word acoustic signatures in units of `noise_std`.
    pub word_signal: f64,
    pub layer_signal: LayerSignal,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 4,
            n_utterances: 200,
            n_layers: 13,
            dim: 32,
            lexical_dim: 32,
            n_mels: 16,
            vocab_size: 80,
            min_words: 3,
            max_words: 7,
            noise_std: 1.0,
            separation: 5.0,
            word_signal: 1.0,
            layer_signal: LayerSignal::Uniform,
            seed: 7,
        }
    }
}

const LABELS: [&str; 6] = ["angry", "happy", "neutral", "sad", "fear", "disgust"];
const SYLLABLES: [&str; 20] = [
    "ba", "ko", "ri", "ne", "tu", "sa", "mi", "lo", "de", "fa", "gu", "pe", "zo", "ha", "ki", "vu", "ta", "no", "wi", "ze",
];
const MANIFEST_FILE: &str = "manifest.json";

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n_classes < 2 || self.n_utterances < 2 || self.n_layers == 0 {
            return bad(format!(
                "need >= 2 classes, >= 2 utterances and >= 1 layer, got {} / {} / {}",
                self.n_classes, self.n_utterances, self.n_layers
            ));
        }
        if self.dim == 0 || self.lexical_dim == 0 || self.n_mels == 0 {
            return bad("dimensions must be >= 1".into());
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad(format!("bad word-count range {}..={}", self.min_words, self.max_words));
        }
        if self.vocab_size < 2 || self.vocab_size > 4000 {
            return bad(format!("vocab_size must lie in 2..=4000, got {}", self.vocab_size));
        }
        if !(self.noise_std > 0.0) || !(self.separation >= 0.0) || !(self.word_signal >= 0.0) {
            return bad("noise_std must be > 0; separation and word_signal >= 0".into());
        }
        match &self.layer_signal {
            LayerSignal::Planted(l) if *l >= self.n_layers => {
                bad(format!("planted layer {l} out of range for {} layers", self.n_layers))
            }
            LayerSignal::Weights(w) if w.len() != self.n_layers => {
                bad(format!("{} layer weights for {} layers", w.len(), self.n_layers))
            }
            _ => Ok(()),
        }
    }

    fn layer_weights(&self) -> Vec<f64> {
        match &self.layer_signal {
            LayerSignal::Uniform => vec![1.0; self.n_layers],
            LayerSignal::Planted(p) => (0..self.n_layers).map(|l| if l == *p { 1.0 } else { 0.0 }).collect(),
            LayerSignal::Weights(w) => w.clone(),
        }
    }

    /// How strongly word signatures follow the lexical vectors at each layer;
    /// peaks two thirds of the way up the stack.
    fn lexical_coupling(&self) -> Vec<f64> {
        let peak = (2 * (self.n_layers - 1)) as f64 / 3.0;
        let width = (self.n_layers as f64 / 4.0).max(1.0);
        (0..self.n_layers)
            .map(|l| 0.9 * (-((l as f64 - peak) / width).powi(2)).exp())
            .collect()
    }
}

fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// `n` vectors of length `dim` with pairwise distance `distance`
/// (orthogonal when `dim >= n`, random directions otherwise).
fn centroids(rng: &mut impl Rng, n: usize, dim: usize, distance: f64) -> Vec<Vec<f64>> {
    let radius = distance / std::f64::consts::SQRT_2;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = gaussian(rng, dim, 1.0);
        if n <= dim {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * radius).collect())
        .collect()
}

fn vocabulary(rng: &mut impl Rng, size: usize) -> Vec<String> {
    let mut words: Vec<String> = Vec::with_capacity(size);
    while words.len() < size {
        let n = rng.random_range(2..=3);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

fn ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub vocabulary: Vec<String>,
}

/// Writes a labelled corpus with known structure under `out`: class
/// centroids scaled per layer, word signatures coupled to lexical vectors,
/// and Gaussian frame noise. Output bytes depend only on `config`.
pub fn generate_synthetic_corpus(config: &SynthConfig, out: impl AsRef<Path>) -> Result<SynthCorpus> {
    config.validate()?;
    let out = out.as_ref();
    for sub in ["audio", "lexical", "mel", "alignments"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sigma = config.noise_std;
    let alpha = config.layer_weights();
    let coupling = config.lexical_coupling();
    let class_mu = centroids(&mut rng, config.n_classes, config.dim, config.separation * sigma);
    let mel_mu = centroids(&mut rng, config.n_classes, config.n_mels, 0.5 * config.separation * sigma);

    let vocab = vocabulary(&mut rng, config.vocab_size);
    let lex: Vec<Vec<f64>> = (0..vocab.len()).map(|_| gaussian(&mut rng, config.lexical_dim, 1.0)).collect();
    let projection: Vec<Vec<f64>> = (0..config.dim)
        .map(|_| gaussian(&mut rng, config.lexical_dim, 1.0 / (config.lexical_dim as f64).sqrt()))
        .collect();
    let ws = config.word_signal * sigma;
    // signature[w][l]
    let signature: Vec<Vec<Vec<f64>>> = lex
        .iter()
        .map(|l_w| {
            let coupled: Vec<f64> = projection
                .iter()
                .map(|row| row.iter().zip(l_w).map(|(a, b)| a * b).sum())
                .collect();
            coupling
                .iter()
                .map(|&beta| {
                    let free = gaussian(&mut rng, config.dim, 1.0);
                    let keep = (1.0 - beta * beta).sqrt();
                    coupled.iter().zip(free).map(|(c, z)| ws * (beta * c + keep * z)).collect()
                })
                .collect()
        })
        .collect();
    let piece_offsets: Vec<Vec<f64>> = (0..vocab.len()).map(|_| gaussian(&mut rng, config.lexical_dim, 0.3)).collect();
    let cls = gaussian(&mut rng, config.lexical_dim, 1.0);
    let sep = gaussian(&mut rng, config.lexical_dim, 1.0);

    let label_set: Vec<String> = (0..config.n_classes)
        .map(|c| LABELS.get(c).map_or_else(|| format!("class{c}"), |s| s.to_string()))
        .collect();
    let (stride, window) = (DEFAULT_FRAME_STRIDE_S, DEFAULT_FRAME_WINDOW_S);
    let mut utterances = Vec::with_capacity(config.n_utterances);

    for u in 0..config.n_utterances {
        let id = format!("utt{u:04}");
        let class = u % config.n_classes;
        let n_words = rng.random_range(config.min_words..=config.max_words);
        let words: Vec<usize> = (0..n_words).map(|_| rng.random_range(0..vocab.len())).collect();

        let mut t = 0.05 + rng.random_range(0.0..0.05);
        let mut spans = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let start = ms(t);
            let end = ms(t + rng.random_range(0.08..0.25));
            spans.push((start, end));
            t = end + rng.random_range(0.0..0.06);
        }
        let last_end = spans.last().expect("at least one word").1;
        let n_frames = ((last_end + 0.05 - window) / stride).floor() as usize + 1;

        let owner = |i: usize| {
            let mid = i as f64 * stride + window / 2.0;
            spans.iter().position(|&(s, e)| s <= mid && mid < e)
        };
        let mut audio = Vec::with_capacity(config.n_layers * n_frames * config.dim);
        for (l, &a) in alpha.iter().enumerate() {
            for i in 0..n_frames {
                let word = owner(i).map(|k| &signature[words[k]][l]);
                for j in 0..config.dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let s = word.map_or(0.0, |w| w[j]);
                    audio.push((a * class_mu[class][j] + s + sigma * z) as f32);
                }
            }
        }
        let mut mel = Vec::with_capacity(n_frames * config.n_mels);
        for _ in 0..n_frames {
            for mu in &mel_mu[class] {
                let z: f64 = StandardNormal.sample(&mut rng);
                mel.push((mu + sigma * z) as f32);
            }
        }

        let mut lex_rows: Vec<Vec<f64>> = vec![cls.clone()];
        let mut word_map: Vec<Option<usize>> = vec![None];
        for (k, &w) in words.iter().enumerate() {
            if vocab[w].len() > 5 {
                for sign in [1.0, -1.0] {
                    lex_rows.push(lex[w].iter().zip(&piece_offsets[w]).map(|(x, o)| x + sign * o).collect());
                    word_map.push(Some(k));
                }
            } else {
                lex_rows.push(lex[w].clone());
                word_map.push(Some(k));
            }
        }
        lex_rows.push(sep.clone());
        word_map.push(None);
        let mut lexical = Vec::with_capacity(lex_rows.len() * config.lexical_dim);
        for row in &lex_rows {
            for &x in row {
                let z: f64 = StandardNormal.sample(&mut rng);
                lexical.push((x + 0.1 * z) as f32);
            }
        }

        let alignments: Vec<WordAlignment> = words
            .iter()
            .zip(&spans)
            .enumerate()
            .map(|(k, (&w, &(s, e)))| WordAlignment::new(vocab[w].clone(), s, e, k))
            .collect();

        let entry = UtteranceEntry {
            id: id.clone(),
            audio_tensor_path: format!("audio/{id}.awet"),
            lexical_tensor_path: format!("lexical/{id}.awet"),
            alignment_path: format!("alignments/{id}.jsonl"),
            mel_tensor_path: Some(format!("mel/{id}.awet")),
            label: label_set[class].clone(),
            transcript: words.iter().map(|&w| vocab[w].as_str()).collect::<Vec<_>>().join(" "),
            n_frames,
            lexical_word_map: Some(word_map),
        };
        write_tensor(&[config.n_layers, n_frames, config.dim], &audio, out.join(&entry.audio_tensor_path))?;
        write_tensor(&[1, n_frames, config.n_mels], &mel, out.join(entry.mel_tensor_path.as_ref().expect("mel path")))?;
        write_tensor(&[lex_rows.len(), config.lexical_dim], &lexical, out.join(&entry.lexical_tensor_path))?;
        write_alignments(&alignments, out.join(&entry.alignment_path))?;
        utterances.push(entry);
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        corpus_name: format!("synthetic-seed{}", config.seed),
        n_layers: config.n_layers,
        frame_stride_s: stride,
        frame_window_s: window,
        label_set,
        lexical_layer: Some("synthetic".into()),
        utterances,
    };
    let manifest_path = out.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(SynthCorpus {
        manifest_path,
        manifest,
        vocabulary: vocab,
    })
}
