//! Word alignments, stored one JSON object per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAlignment {
    pub word: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Position of the word in the whitespace-tokenized transcript.
    pub token_index: usize,
}

impl WordAlignment {
    pub fn new(word: impl Into<String>, start_s: f64, end_s: f64, token_index: usize) -> Self {
        WordAlignment {
            word: word.into(),
            start_s,
            end_s,
            token_index,
        }
    }
}

pub fn parse_alignments(text: &str) -> Result<Vec<WordAlignment>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("alignment line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn format_alignments(records: &[WordAlignment]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).expect("alignment serializes");
        writeln!(out, "{line}").unwrap();
    }
    out
}

pub fn read_alignments(path: impl AsRef<Path>) -> Result<Vec<WordAlignment>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alignments(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_alignments(records: &[WordAlignment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_alignments(records)).map_err(|e| Error::io(path, e))
}

/// Checks the per-utterance invariants: valid intervals, sorted by start, and
/// non-overlapping. `max_end_s` bounds the last end time when given.
///
/// Returns one message per violation.
pub fn check_alignments(records: &[WordAlignment], max_end_s: Option<f64>) -> Vec<String> {
    const EPS: f64 = 1e-6;
    let mut problems = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !(r.start_s.is_finite() && r.end_s.is_finite()) || r.start_s < 0.0 || r.end_s <= r.start_s {
            problems.push(format!(
                "word {i} ({:?}) has invalid interval [{}, {}]",
                r.word, r.start_s, r.end_s
            ));
        }
        if let Some(max) = max_end_s {
            if r.end_s > max + EPS {
                problems.push(format!(
                    "word {i} ({:?}) ends at {} s, past utterance end {max:.3} s",
                    r.word, r.end_s
                ));
            }
        }
    }
    for (i, pair) in records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if b.start_s < a.start_s {
            problems.push(format!("words {i} and {} are not sorted by start time", i + 1));
        } else if b.start_s < a.end_s - EPS {
            problems.push(format!(
                "words {i} ({:?}) and {} ({:?}) overlap",
                a.word,
                i + 1,
                b.word
            ));
        }
    }
    problems
}
