//! Speech emotion recognition harness: dataset assembly from the stored
//! streams, seeded train/test runs, layer sweeps, synthetic corpora and
//! report files.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod sweep;
pub mod synth;

pub use config::{ConfigOverrides, ExperimentConfig, Feature, Fusion, LayerSelection, TextVector};
pub use dataset::{assemble_dataset, Corpus, Dataset, Standardizer};
pub use experiment::{run_experiment, run_on_corpus, run_seed, RunReport};
pub use metrics::{mean_std, split, split_indices, weighted_accuracy};
pub use report::{emit_report, plot_data, report_csv, Report, ReportFormat};
pub use sweep::{layer_sweep, RowStatus, SweepReport, SweepRow, SweepSummary};
pub use synth::{generate_synthetic_corpus, LayerSignal, SynthConfig, SynthCorpus};
