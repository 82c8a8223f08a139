//! Corpus manifest: one JSON document tying tensors, alignments, and labels together.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::alignment::{check_alignments, read_alignments};
use super::tensor::read_tensor;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FRAME_STRIDE_S: f64 = 0.020;
pub const DEFAULT_FRAME_WINDOW_S: f64 = 0.025;
/// L0 (convolutional front end) plus twelve transformer layers.
pub const DEFAULT_N_LAYERS: usize = 13;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_stride() -> f64 {
    DEFAULT_FRAME_STRIDE_S
}
fn default_window() -> f64 {
    DEFAULT_FRAME_WINDOW_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub corpus_name: String,
    pub n_layers: usize,
    #[serde(default = "default_stride")]
    pub frame_stride_s: f64,
    #[serde(default = "default_window")]
    pub frame_window_s: f64,
    pub label_set: Vec<String>,
    /// Which text-encoder layer produced the lexical tensors (provenance only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical_layer: Option<String>,
    pub utterances: Vec<UtteranceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub id: String,
    /// `[n_layers, n_frames, dim]` speech-encoder stream.
    pub audio_tensor_path: String,
    /// `[n_tokens, dim]` text-encoder token embeddings.
    pub lexical_tensor_path: String,
    pub alignment_path: String,
    /// Optional `[1, n_frames, n_mels]` Mel stream on the same frame grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mel_tensor_path: Option<String>,
    pub label: String,
    pub transcript: String,
    pub n_frames: usize,
    /// For each lexical row, the transcript word it belongs to (`null` for
    /// special tokens). When absent, row `i` is word `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical_word_map: Option<Vec<Option<usize>>>,
}

impl UtteranceEntry {
    pub fn transcript_words(&self) -> Vec<String> {
        transcript_words(&self.transcript)
    }

    /// Transcript word index for each lexical row.
    pub fn lexical_rows_to_words(&self, n_rows: usize) -> Vec<Option<usize>> {
        match &self.lexical_word_map {
            Some(map) => map.clone(),
            None => (0..n_rows).map(Some).collect(),
        }
    }
}

/// Whitespace tokenization with lowercase folding.
pub fn transcript_words(transcript: &str) -> Vec<String> {
    transcript.split_whitespace().map(str::to_lowercase).collect()
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Duration covered by `n_frames` analysis windows.
    pub fn duration_s(&self, n_frames: usize) -> f64 {
        if n_frames == 0 {
            return 0.0;
        }
        (n_frames - 1) as f64 * self.frame_stride_s + self.frame_window_s
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_set.iter().position(|l| l == label)
    }
}

/// Resolves a manifest-relative path against the manifest's directory.
pub fn resolve(root: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProblemKind {
    Corpus,
    DuplicateId,
    UnknownLabel,
    MissingFile,
    Unparseable,
    TensorShape,
    FrameCount,
    Alignment,
    LexicalMap,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Problem {
    /// `None` for corpus-level problems.
    pub utterance_id: Option<String>,
    pub kind: ProblemKind,
    pub message: String,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.utterance_id {
            Some(id) => write!(f, "[{id}] {:?}: {}", self.kind, self.message),
            None => write!(f, "[corpus] {:?}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub problems: Vec<Problem>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks every manifest invariant. Problems are sorted so the report does not
/// depend on utterance order.
pub fn validate_manifest(manifest: &Manifest, root: &Path) -> ValidationReport {
    let mut problems = Vec::new();
    let corpus = |message: String| Problem {
        utterance_id: None,
        kind: ProblemKind::Corpus,
        message,
    };

    if manifest.schema_version != SCHEMA_VERSION {
        problems.push(corpus(format!(
            "unsupported schema_version {}",
            manifest.schema_version
        )));
    }
    if manifest.n_layers == 0 {
        problems.push(corpus("n_layers must be >= 1".into()));
    }
    if !(manifest.frame_stride_s > 0.0) || !(manifest.frame_window_s >= manifest.frame_stride_s) {
        problems.push(corpus(format!(
            "need 0 < frame_stride_s <= frame_window_s, got stride {} window {}",
            manifest.frame_stride_s, manifest.frame_window_s
        )));
    }
    if manifest.label_set.is_empty() {
        problems.push(corpus("label_set is empty".into()));
    }
    let distinct: BTreeSet<&String> = manifest.label_set.iter().collect();
    if distinct.len() != manifest.label_set.len() {
        problems.push(corpus("label_set contains duplicates".into()));
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for u in &manifest.utterances {
        *counts.entry(u.id.as_str()).or_default() += 1;
    }
    for (id, n) in &counts {
        if *n > 1 {
            problems.push(Problem {
                utterance_id: Some(id.to_string()),
                kind: ProblemKind::DuplicateId,
                message: format!("utterance id appears {n} times"),
            });
        }
    }

    for u in &manifest.utterances {
        validate_utterance(manifest, root, u, &mut problems);
    }

    problems.sort();
    problems.dedup();
    ValidationReport { problems }
}

fn validate_utterance(manifest: &Manifest, root: &Path, u: &UtteranceEntry, out: &mut Vec<Problem>) {
    let mut push = |kind: ProblemKind, message: String| {
        out.push(Problem {
            utterance_id: Some(u.id.clone()),
            kind,
            message,
        })
    };
    let file_problem = |e: &Error| match e.root() {
        Error::Io { .. } => ProblemKind::MissingFile,
        _ => ProblemKind::Unparseable,
    };

    if manifest.label_index(&u.label).is_none() {
        push(
            ProblemKind::UnknownLabel,
            format!("label {:?} not in label_set", u.label),
        );
    }
    if u.n_frames == 0 {
        push(ProblemKind::FrameCount, "n_frames must be >= 1".into());
    }

    match read_tensor(resolve(root, &u.audio_tensor_path)) {
        Err(e) => push(file_problem(&e), format!("audio tensor: {e}")),
        Ok(t) => {
            let d = t.dims();
            if d.len() != 3 {
                push(
                    ProblemKind::TensorShape,
                    format!("audio tensor must be 3-D [layers, frames, dim], got {d:?}"),
                );
            } else {
                if d[0] != manifest.n_layers {
                    push(
                        ProblemKind::TensorShape,
                        format!("audio tensor has {} layers, manifest says {}", d[0], manifest.n_layers),
                    );
                }
                if d[1] != u.n_frames {
                    push(
                        ProblemKind::FrameCount,
                        format!("audio tensor has {} frames, manifest says {}", d[1], u.n_frames),
                    );
                }
            }
        }
    }

    if let Some(mel) = &u.mel_tensor_path {
        match read_tensor(resolve(root, mel)) {
            Err(e) => push(file_problem(&e), format!("mel tensor: {e}")),
            Ok(t) => {
                let d = t.dims();
                if d.len() != 3 {
                    push(
                        ProblemKind::TensorShape,
                        format!("mel tensor must be 3-D [1, frames, mels], got {d:?}"),
                    );
                } else if d[1] != u.n_frames {
                    push(
                        ProblemKind::FrameCount,
                        format!("mel tensor has {} frames, manifest says {}", d[1], u.n_frames),
                    );
                }
            }
        }
    }

    let n_words = u.transcript_words().len();
    match read_tensor(resolve(root, &u.lexical_tensor_path)) {
        Err(e) => push(file_problem(&e), format!("lexical tensor: {e}")),
        Ok(t) => {
            let d = t.dims();
            if d.len() != 2 {
                push(
                    ProblemKind::TensorShape,
                    format!("lexical tensor must be 2-D [tokens, dim], got {d:?}"),
                );
            } else {
                let map = u.lexical_rows_to_words(d[0]);
                if map.len() != d[0] {
                    push(
                        ProblemKind::LexicalMap,
                        format!("lexical_word_map has {} entries for {} rows", map.len(), d[0]),
                    );
                }
                if let Some(bad) = map.iter().flatten().find(|&&w| w >= n_words) {
                    push(
                        ProblemKind::LexicalMap,
                        format!("lexical row maps to word {bad}, transcript has {n_words} words"),
                    );
                }
            }
        }
    }

    match read_alignments(resolve(root, &u.alignment_path)) {
        Err(e) => push(file_problem(&e), format!("alignment: {e}")),
        Ok(records) => {
            let max_end = (u.n_frames > 0).then(|| manifest.duration_s(u.n_frames));
            for msg in check_alignments(&records, max_end) {
                push(ProblemKind::Alignment, msg);
            }
            if let Some(r) = records.iter().find(|r| r.token_index >= n_words) {
                push(
                    ProblemKind::Alignment,
                    format!(
                        "word {:?} has token_index {}, transcript has {n_words} words",
                        r.word, r.token_index
                    ),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::alignment::{write_alignments, WordAlignment};
    use crate::store::tensor::write_tensor;

    fn fixture(dir: &Path) -> Manifest {
        let mut utterances = Vec::new();
        for (i, label) in ["ang", "sad"].iter().enumerate() {
            let id = format!("u{i}");
            write_tensor(&[2, 10, 3], &[0.5; 60], dir.join(format!("{id}.audio"))).unwrap();
            write_tensor(&[2, 3], &[1.0; 6], dir.join(format!("{id}.lex"))).unwrap();
            write_alignments(
                &[
                    WordAlignment::new("hello", 0.0, 0.08, 0),
                    WordAlignment::new("there", 0.1, 0.2, 1),
                ],
                dir.join(format!("{id}.align")),
            )
            .unwrap();
            utterances.push(UtteranceEntry {
                id: id.clone(),
                audio_tensor_path: format!("{id}.audio"),
                lexical_tensor_path: format!("{id}.lex"),
                alignment_path: format!("{id}.align"),
                mel_tensor_path: None,
                label: label.to_string(),
                transcript: "Hello there".into(),
                n_frames: 10,
                lexical_word_map: None,
            });
        }
        Manifest {
            schema_version: SCHEMA_VERSION,
            corpus_name: "fixture".into(),
            n_layers: 2,
            frame_stride_s: DEFAULT_FRAME_STRIDE_S,
            frame_window_s: DEFAULT_FRAME_WINDOW_S,
            label_set: vec!["ang".into(), "sad".into()],
            lexical_layer: None,
            utterances,
        }
    }

    #[test]
    fn clean_manifest_has_no_problems() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let report = validate_manifest(&m, dir.path());
        assert!(report.is_clean(), "{:?}", report.problems);
    }

    #[test]
    fn missing_alignment_is_one_problem() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        fs::remove_file(dir.path().join("u1.align")).unwrap();
        let report = validate_manifest(&m, dir.path());
        assert_eq!(report.problems.len(), 1);
        assert_eq!(report.problems[0].utterance_id.as_deref(), Some("u1"));
        assert_eq!(report.problems[0].kind, ProblemKind::MissingFile);
    }

    #[test]
    fn duplicate_id_is_one_problem() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        let dup = m.utterances[0].clone();
        m.utterances.push(dup);
        let report = validate_manifest(&m, dir.path());
        assert_eq!(report.problems.len(), 1, "{:?}", report.problems);
        assert_eq!(report.problems[0].kind, ProblemKind::DuplicateId);
    }

    #[test]
    fn label_frames_and_map_problems() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        m.utterances[0].label = "happy".into();
        m.utterances[1].n_frames = 11;
        m.utterances[1].lexical_word_map = Some(vec![None, Some(5)]);
        let kinds: Vec<_> = validate_manifest(&m, dir.path())
            .problems
            .iter()
            .map(|p| p.kind)
            .collect();
        assert!(kinds.contains(&ProblemKind::UnknownLabel));
        assert!(kinds.contains(&ProblemKind::FrameCount));
        assert!(kinds.contains(&ProblemKind::LexicalMap));
    }

    #[test]
    fn corrupt_tensor_is_unparseable() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        fs::write(dir.path().join("u0.audio"), b"garbage").unwrap();
        let report = validate_manifest(&m, dir.path());
        assert_eq!(report.problems.len(), 1);
        assert_eq!(report.problems[0].kind, ProblemKind::Unparseable);
    }

    #[test]
    fn report_is_order_independent() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        m.utterances[0].label = "nope".into();
        fs::remove_file(dir.path().join("u1.lex")).unwrap();
        let a = validate_manifest(&m, dir.path());
        m.utterances.reverse();
        let b = validate_manifest(&m, dir.path());
        assert_eq!(a, b);
        assert_eq!(a.problems.len(), 2);
    }

    #[test]
    fn json_roundtrip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let back: Manifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);

        let minimal = r#"{"corpus_name":"x","n_layers":13,"label_set":["a"],"utterances":[]}"#;
        let m: Manifest = serde_json::from_str(minimal).unwrap();
        assert_eq!(m.frame_stride_s, 0.020);
        assert_eq!(m.frame_window_s, 0.025);
        assert_eq!(m.schema_version, 1);
    }
}
