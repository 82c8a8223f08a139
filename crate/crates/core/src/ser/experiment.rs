use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Feature, Fusion, LayerSelection};
use super::dataset::{assemble_dataset, Corpus, Dataset, Standardizer};
use super::metrics::{mean_std, split_indices, weighted_accuracy};
use crate::error::{Error, Result};
use crate::nn::{train, Classifier, Input, TrainConfig};

/// Outcome of `n_runs` seeded train/test runs of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub feature: Feature,
    pub fusion: Fusion,
    pub layer: usize,
    pub seeds: Vec<u64>,
    pub wa: Vec<f64>,
    pub mean_wa: f64,
    pub std_wa: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Not written to CSV output.
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn n_runs(&self) -> usize {
        self.wa.len()
    }
}

/// Independent seed streams for the split, the weights and the batch order.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub wa: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub final_loss: f64,
}

/// One split, fresh initialization, training and test-set scoring.
pub fn run_seed(dataset: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let (tr, te) = split_indices(dataset.len(), config.split_ratio, derive_seed(seed, 0))?;
    let mut train_set: Vec<(Input<f32>, usize)> = tr.iter().map(|&i| dataset.examples[i].clone()).collect();
    let mut test_set: Vec<(Input<f32>, usize)> = te.iter().map(|&i| dataset.examples[i].clone()).collect();
    if config.standardize {
        let s = Standardizer::fit(&train_set)?;
        train_set.iter_mut().chain(test_set.iter_mut()).for_each(|(x, _)| s.apply(x));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut model = match &train_set[0].0 {
        Input::Vector(v) => Classifier::dense(v.len(), dataset.n_classes, &config.model, &mut rng),
        Input::Pair { audio, text } => {
            Classifier::with_cross_attention(audio.ncols(), text.ncols(), dataset.n_classes, &config.model, &mut rng)
        }
    };
    let tcfg = TrainConfig {
        seed: derive_seed(seed ^ config.train.seed, 2),
        ..config.train
    };
    let history = train(&mut model, &train_set, &tcfg)?;
    let final_loss = history.last().copied().unwrap_or(f32::NAN) as f64;
    if !final_loss.is_finite() {
        return Err(Error::Numeric(format!("training diverged (seed {seed})")));
    }

    let inputs: Vec<&Input<f32>> = test_set.iter().map(|(x, _)| x).collect();
    let labels: Vec<usize> = test_set.iter().map(|(_, y)| *y).collect();
    let preds = model.predict_batch(&inputs)?;
    Ok(SeedOutcome {
        wa: weighted_accuracy(&preds, &labels)?,
        n_train: train_set.len(),
        n_test: test_set.len(),
        final_loss,
    })
}

/// Runs every seed of `config` at one layer on an already loaded corpus.
/// Mel has a single layer, so `layer` is ignored for it.
pub fn run_on_corpus(corpus: &Corpus, config: &ExperimentConfig, layer: usize) -> Result<RunReport> {
    let layer = if config.feature == Feature::Mel { 0 } else { layer };
    let config = config.with_layer(layer);
    config.validate()?;
    let started = Instant::now();
    let dataset = assemble_dataset(corpus, &config, layer)?;
    let outcomes = config
        .seeds
        .par_iter()
        .map(|&s| run_seed(&dataset, &config, s).map_err(|e| e.context(format!("seed {s}"))))
        .collect::<Result<Vec<_>>>()?;
    let wa: Vec<f64> = outcomes.iter().map(|o| o.wa).collect();
    let (mean_wa, std_wa) = mean_std(&wa);
    Ok(RunReport {
        fingerprint: config.fingerprint(),
        feature: config.feature,
        fusion: config.fusion,
        layer,
        seeds: config.seeds.clone(),
        wa,
        mean_wa,
        std_wa,
        n_train: outcomes[0].n_train,
        n_test: outcomes[0].n_test,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Loads the manifest and runs the single layer named in `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let LayerSelection::Single(layer) = config.layer else {
        return Err(Error::Config("run_experiment needs a single layer; use layer_sweep for \"all\"".into()));
    };
    let corpus = Corpus::load(&config.manifest)?;
    run_on_corpus(&corpus, config, layer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_per_stream() {
        let s: Vec<u64> = (0..3).map(|k| derive_seed(1, k)).collect();
        assert_ne!(s[0], s[1]);
        assert_ne!(s[1], s[2]);
        assert_eq!(derive_seed(5, 2), derive_seed(5, 2));
    }
}
