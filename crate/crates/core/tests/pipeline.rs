use std::fs;
use std::path::Path;

use awe_core::neighborhood::{aggregate_rows, lns_layer_report, neighbor_table, EmbeddingSpace, Side};
use awe_core::pooling::AweStore;
use awe_core::ser::{
    emit_report, generate_synthetic_corpus, layer_sweep, run_experiment, run_on_corpus, ConfigOverrides, Corpus,
    ExperimentConfig, Feature, Fusion, LayerSelection, Report, ReportFormat, SynthConfig, SynthCorpus,
};
use awe_core::store::{validate_manifest, Manifest, ProblemKind};
use awe_core::Error;

fn small(dir: &Path) -> SynthCorpus {
    let cfg = SynthConfig {
        n_utterances: 40,
        n_layers: 4,
        dim: 8,
        lexical_dim: 6,
        vocab_size: 12,
        ..SynthConfig::default()
    };
    generate_synthetic_corpus(&cfg, dir).unwrap()
}

fn quick(manifest: &Path, feature: Feature, fusion: Fusion, layer: LayerSelection) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(manifest, feature, fusion, layer);
    cfg.seeds = vec![1, 2];
    cfg.train.epochs = 15;
    cfg
}

#[test]
fn store_roundtrip_and_lns() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let store = AweStore::build(&c.manifest, dir.path(), &[0, 1, 2, 3]).unwrap();
    let words: usize = c.manifest.utterances.iter().map(|u| u.transcript.split_whitespace().count()).sum();
    assert_eq!(store.n_rows(), words);

    let out = dir.path().join("store");
    store.save(&out).unwrap();
    let back = AweStore::load(&out, None).unwrap();
    assert_eq!(back.index, store.index);
    assert_eq!(back.layers, store.layers);
    assert_eq!(back.lexical, store.lexical);

    let report = lns_layer_report(&back, &[1, 3, 5], 2).unwrap();
    assert_eq!(report.rows.len(), 12);
    assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_lns)));
    assert!(report.rows.windows(2).all(|w| (w[0].layer, w[0].k) < (w[1].layer, w[1].k)));
}

fn brute_neighbors(space: &EmbeddingSpace<f64>, word: &str, k: usize) -> Vec<String> {
    let q = space.vector(word).unwrap();
    let cos = |v: &[f64]| {
        let d: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
        let n = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        d / (n(q) * n(v))
    };
    let mut all: Vec<(f64, &str)> = space.entries().filter(|(w, _)| *w != word).map(|(w, v)| (cos(v), w)).collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    all.into_iter().take(k).map(|(_, w)| w.to_string()).collect()
}

#[test]
fn neighbor_table_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_utterances: 30,
        n_layers: 2,
        dim: 6,
        lexical_dim: 5,
        vocab_size: 6,
        ..SynthConfig::default()
    };
    let c = generate_synthetic_corpus(&cfg, dir.path()).unwrap();
    let store = AweStore::build(&c.manifest, dir.path(), &[1]).unwrap();
    let acoustic: EmbeddingSpace<f64> =
        aggregate_rows(Side::Acoustic { layer: 1 }, store.words(), store.layer(1).unwrap(), 1).unwrap();
    let lexical: EmbeddingSpace<f64> = aggregate_rows(Side::Lexical, store.words(), &store.lexical, 1).unwrap();
    assert_eq!(acoustic.len(), 6);
    let words: Vec<&str> = c.vocabulary.iter().map(String::as_str).collect();
    let table = neighbor_table(&words, &acoustic, &lexical, 3).unwrap();
    for row in &table.rows {
        assert_eq!(row.acoustic, brute_neighbors(&acoustic, &row.word, 3));
        assert_eq!(row.lexical, brute_neighbors(&lexical, &row.word, 3));
    }
}

#[test]
fn run_experiment_from_manifest_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let mut cfg = quick(&c.manifest_path, Feature::Raw, Fusion::None, LayerSelection::Single(2));
    ConfigOverrides::from_toml("fusion = \"concat\"\nseeds = [4, 9]\n")
        .unwrap()
        .apply(&mut cfg)
        .unwrap();
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.fusion, Fusion::Concat);
    assert_eq!(r.seeds, vec![4, 9]);
    assert_eq!(r.wa.len(), 2);
    assert_eq!((r.n_train, r.n_test), (32, 8));
    assert!(r.wa.iter().all(|w| (0.0..=1.0).contains(w)));

    cfg.layer = LayerSelection::All;
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
}

#[test]
fn manifest_order_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let mut reversed = c.manifest.clone();
    reversed.utterances.reverse();
    let rev_path = dir.path().join("reversed.json");
    reversed.save(&rev_path).unwrap();

    let a = run_experiment(&quick(&c.manifest_path, Feature::Awe, Fusion::Concat, LayerSelection::Single(1))).unwrap();
    let b = run_experiment(&quick(&rev_path, Feature::Awe, Fusion::Concat, LayerSelection::Single(1))).unwrap();
    assert_eq!(a.wa, b.wa);
    assert_eq!(a.fingerprint, b.fingerprint);
}

#[test]
fn failed_layers_are_marked_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let mut m: Manifest = c.manifest.clone();
    m.utterances[3].mel_tensor_path = None;
    let root = dir.path().to_path_buf();
    let corpus = Corpus::from_manifest(m, root).unwrap();

    let mel = quick(&c.manifest_path, Feature::Mel, Fusion::None, LayerSelection::All);
    let sweep = layer_sweep(&corpus, &mel, &[Fusion::None, Fusion::Concat]).unwrap();
    assert_eq!(sweep.rows.len(), 2);
    assert!(sweep.rows.iter().all(|r| !r.status.is_ok() && r.run.is_none()));
    assert!(!sweep.is_complete());

    let raw = quick(&c.manifest_path, Feature::Raw, Fusion::None, LayerSelection::All);
    let sweep = layer_sweep(&corpus, &raw, &[Fusion::None]).unwrap();
    assert_eq!(sweep.rows.len(), 4);
    assert!(sweep.is_complete());
    assert_eq!(sweep.rows.iter().map(|r| r.layer).collect::<Vec<_>>(), vec![0, 1, 2, 3]);

    let out = dir.path().join("out/sweep.csv");
    let files = emit_report(Report::Sweep(&sweep), ReportFormat::PlotData, &out).unwrap();
    assert_eq!(files.len(), 2);
    let series: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
    assert_eq!(series["series"][0]["x"], serde_json::json!([0, 1, 2, 3]));
}

#[test]
fn awe_without_words_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let entry = &c.manifest.utterances[0];
    fs::write(dir.path().join(&entry.alignment_path), "").unwrap();
    let corpus = Corpus::load(&c.manifest_path).unwrap();
    let cfg = quick(&c.manifest_path, Feature::Awe, Fusion::None, LayerSelection::Single(0));
    let ds = awe_core::ser::assemble_dataset(&corpus, &cfg, 0).unwrap();
    assert_eq!(ds.len(), 39);
    assert_eq!(ds.skipped[0].0, entry.id);
    run_on_corpus(&corpus, &cfg, 0).unwrap();
}

#[test]
fn broken_corpus_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    assert!(validate_manifest(&c.manifest, dir.path()).is_clean());
    fs::remove_file(dir.path().join(&c.manifest.utterances[5].lexical_tensor_path)).unwrap();
    let report = validate_manifest(&c.manifest, dir.path());
    assert_eq!(report.problems.len(), 1);
    assert_eq!(report.problems[0].kind, ProblemKind::MissingFile);
}
