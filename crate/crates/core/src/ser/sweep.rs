use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Feature, Fusion, LayerSelection};
use super::dataset::Corpus;
use super::experiment::{run_on_corpus, RunReport};
use super::metrics::mean_std;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layer: usize,
    pub feature: Feature,
    pub fusion: Fusion,
    pub status: RowStatus,
    pub run: Option<RunReport>,
}

impl SweepRow {
    pub fn mean_wa(&self) -> Option<f64> {
        self.run.as_ref().map(|r| r.mean_wa)
    }
}

/// Rows ordered by layer, then fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub feature: Feature,
    pub fusion: Fusion,
    pub layers_ok: usize,
    pub layers_failed: usize,
    /// Mean and spread of the per-layer mean WA.
    pub mean_of_layer_means: f64,
    pub std_of_layer_means: f64,
    /// Mean and spread over every individual run of every layer.
    pub pooled_mean: f64,
    pub pooled_std: f64,
    pub best_layer: Option<usize>,
    pub best_mean_wa: f64,
}

impl SweepReport {
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.status.is_ok())
    }

    pub fn fusions(&self) -> Vec<(Feature, Fusion)> {
        let mut keys: Vec<(Feature, Fusion)> = self.rows.iter().map(|r| (r.feature, r.fusion)).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Successful rows of one fusion, by layer.
    pub fn series(&self, feature: Feature, fusion: Fusion) -> Vec<&RunReport> {
        self.rows
            .iter()
            .filter(|r| r.feature == feature && r.fusion == fusion)
            .filter_map(|r| r.run.as_ref())
            .collect()
    }

    /// Layer with the highest mean WA; ties go to the lower layer.
    pub fn best_layer(&self, feature: Feature, fusion: Fusion) -> Option<usize> {
        self.series(feature, fusion)
            .into_iter()
            .fold(None::<&RunReport>, |best, r| match best {
                Some(b) if b.mean_wa >= r.mean_wa => Some(b),
                _ => Some(r),
            })
            .map(|r| r.layer)
    }

    pub fn summaries(&self) -> Vec<SweepSummary> {
        self.fusions()
            .into_iter()
            .map(|(feature, fusion)| {
                let runs = self.series(feature, fusion);
                let total = self.rows.iter().filter(|r| r.feature == feature && r.fusion == fusion).count();
                let means: Vec<f64> = runs.iter().map(|r| r.mean_wa).collect();
                let pooled: Vec<f64> = runs.iter().flat_map(|r| r.wa.iter().copied()).collect();
                let (mean_of_layer_means, std_of_layer_means) = mean_std(&means);
                let (pooled_mean, pooled_std) = mean_std(&pooled);
                let best_layer = self.best_layer(feature, fusion);
                let best_mean_wa = runs
                    .iter()
                    .find(|r| Some(r.layer) == best_layer)
                    .map_or(f64::NAN, |r| r.mean_wa);
                SweepSummary {
                    feature,
                    fusion,
                    layers_ok: runs.len(),
                    layers_failed: total - runs.len(),
                    mean_of_layer_means,
                    std_of_layer_means,
                    pooled_mean,
                    pooled_std,
                    best_layer,
                    best_mean_wa,
                }
            })
            .collect()
    }
}

fn sweep_layers(corpus: &Corpus, config: &ExperimentConfig) -> Result<Vec<usize>> {
    let n = corpus.n_layers(config.feature);
    match config.layer {
        LayerSelection::All => Ok((0..n).collect()),
        LayerSelection::Single(_) if config.feature == Feature::Mel => Ok(vec![0]),
        LayerSelection::Single(l) if l < n => Ok(vec![l]),
        LayerSelection::Single(l) => Err(Error::Layer { layer: l, n_layers: n }),
    }
}

/// Runs every (layer, fusion) pair. A failing pair is recorded in its row
/// and the rest of the sweep continues.
pub fn layer_sweep(corpus: &Corpus, config: &ExperimentConfig, fusions: &[Fusion]) -> Result<SweepReport> {
    let layers = sweep_layers(corpus, config)?;
    let mut fusions = fusions.to_vec();
    fusions.sort();
    fusions.dedup();
    if fusions.is_empty() {
        return Err(Error::Config("no fusion modes to sweep".into()));
    }
    let jobs: Vec<(usize, Fusion)> = layers
        .iter()
        .flat_map(|&l| fusions.iter().map(move |&f| (l, f)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(layer, fusion)| {
            let cfg = config.with_fusion(fusion);
            match run_on_corpus(corpus, &cfg, layer) {
                Ok(run) => SweepRow {
                    layer,
                    feature: cfg.feature,
                    fusion,
                    status: RowStatus::Ok,
                    run: Some(run),
                },
                Err(e) => {
                    log::error!("layer {layer} {}/{fusion} failed: {e}", cfg.feature);
                    SweepRow {
                        layer,
                        feature: cfg.feature,
                        fusion,
                        status: RowStatus::Failed(e.to_string()),
                        run: None,
                    }
                }
            }
        })
        .collect();
    Ok(SweepReport { rows })
}
