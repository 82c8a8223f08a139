use std::collections::BTreeSet;
use std::fmt;

use super::knn::knn;
use super::space::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_TABLE_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRow {
    pub word: String,
    pub lexical: Vec<String>,
    pub acoustic: Vec<String>,
    /// Words present in both neighbor lists.
    pub shared: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub k: usize,
    pub rows: Vec<NeighborRow>,
}

/// Lexical and acoustic `k`-nearest neighbors for each query word.
pub fn neighbor_table<T: Scalar>(
    words: &[&str],
    acoustic: &EmbeddingSpace<T>,
    lexical: &EmbeddingSpace<T>,
    k: usize,
) -> Result<NeighborTable> {
    let rows = words
        .iter()
        .map(|&w| {
            if !lexical.contains(w) || !acoustic.contains(w) {
                return Err(Error::UnknownWord(w.to_string()));
            }
            let lex: Vec<String> = knn(w, lexical, k)?.words().map(str::to_string).collect();
            let ac: Vec<String> = knn(w, acoustic, k)?.words().map(str::to_string).collect();
            let shared = lex.iter().filter(|x| ac.contains(x)).cloned().collect();
            Ok(NeighborRow {
                word: w.to_string(),
                lexical: lex,
                acoustic: ac,
                shared,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NeighborTable { k, rows })
}

impl NeighborRow {
    /// Neighbor list with shared words wrapped in `*...*`.
    pub fn marked(&self, list: &[String]) -> String {
        list.iter()
            .map(|w| {
                if self.shared.contains(w) {
                    format!("*{w}*")
                } else {
                    w.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for NeighborTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.word.len()).max().unwrap_or(4).max(4);
        let lex: Vec<String> = self.rows.iter().map(|r| r.marked(&r.lexical)).collect();
        let lw = lex.iter().map(String::len).max().unwrap_or(0).max(17);
        writeln!(f, "{:width$} | {:lw$} | Acoustic Neighbors", "Word", "Lexical Neighbors")?;
        for (r, l) in self.rows.iter().zip(&lex) {
            writeln!(f, "{:width$} | {:lw$} | {}", r.word, l, r.marked(&r.acoustic))?;
        }
        Ok(())
    }
}
