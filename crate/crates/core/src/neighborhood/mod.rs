//! Word-type embedding spaces, exact cosine KNN, and Local Neighborhood
//! Similarity between an acoustic and a lexical space.

pub mod knn;
pub mod lns;
pub mod space;
pub mod table;

pub use knn::{cosine, knn, NeighborSet};
pub use lns::{jaccard, lns, lns_layer_report, mean_lns, LnsReport, LnsRow, DEFAULT_KS};
pub use space::{aggregate_rows, aggregate_word_types, restrict_to_shared, EmbeddingSpace, Side};
pub use table::{neighbor_table, NeighborRow, NeighborTable, DEFAULT_TABLE_K};
