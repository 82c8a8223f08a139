use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn awe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awe")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = awe(args);
    assert!(
        out.status.success(),
        "awe {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) -> String {
    let corpus = dir.join("corpus");
    ok(&[
        "synth", "--classes", "3", "--utts", "30", "--layers", "3", "--dim", "8", "--vocab", "15", "--out",
        corpus.to_str().unwrap(),
    ]);
    corpus.join("manifest.json").to_str().unwrap().to_string()
}

#[test]
fn validate_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    assert!(ok(&["validate", "--manifest", &manifest]).contains("0 problems"));

    fs::remove_file(dir.path().join("corpus/alignments/utt0002.jsonl")).unwrap();
    let out = awe(&["validate", "--manifest", &manifest]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("utt0002"), "{text}");
}

#[test]
fn pool_lns_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let store = dir.path().join("store");
    let store = store.to_str().unwrap();
    ok(&["pool", "--manifest", &manifest, "--layers", "0..2", "--out", store]);

    let csv = dir.path().join("lns.csv");
    ok(&[
        "lns", "--awe-store", store, "--lexical", &format!("{store}/lexical.awet"), "--k", "2,4", "--min-count", "2",
        "--out", csv.to_str().unwrap(), "--plot-data",
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "layer,K,mean_lns,vocab_size");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(dir.path().join("lns.series.json").exists());

    let first_word = fs::read_to_string(dir.path().join("store/index.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .to_string();
    let table = ok(&["neighbors", "--awe-store", store, "--layer", "1", "--words", &first_word, "--k", "3"]);
    assert!(table.contains("Lexical Neighbors"));
    assert!(table.contains(&first_word));

    let bad = awe(&["neighbors", "--awe-store", store, "--layer", "1", "--words", "zzzz", "--k", "3"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn ser_sweep_and_config_override() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("sweep");
    ok(&[
        "ser", "--manifest", &manifest, "--feature", "awe", "--fusion", "all", "--layer", "all", "--runs", "2",
        "--seeds", "1,2", "--epochs", "2", "--out", out.to_str().unwrap(),
    ]);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 3);
    assert!(out.join("sweep_summary.csv").exists());
    assert!(out.join("sweep.series.json").exists());

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "feature = \"raw\"\nlayer = 1\nseeds = [3]\n[train]\nepochs = 2\n").unwrap();
    let out = dir.path().join("single");
    ok(&["ser", "--manifest", &manifest, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    let row = runs.lines().nth(1).unwrap();
    assert!(row.starts_with("raw,none,1,1,"), "{row}");
}

#[test]
fn ser_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let rejected = awe(&["ser", "--manifest", &manifest, "--feature", "mel", "--fusion", "xattn", "--out", out]);
    assert_eq!(rejected.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("mel + cross-attention"));

    let mismatch = awe(&["ser", "--manifest", &manifest, "--runs", "3", "--seeds", "1,2", "--out", out]);
    assert_eq!(mismatch.status.code(), Some(1));

    // a utterance without a mel stream makes every mel row fail
    let text = fs::read_to_string(&manifest).unwrap();
    let broken = text.replacen("\"mel_tensor_path\": \"mel/utt0001.awet\",", "", 1);
    assert_ne!(broken, text);
    fs::write(&manifest, broken).unwrap();
    let partial = awe(&[
        "ser", "--manifest", &manifest, "--feature", "mel", "--layer", "all", "--runs", "1", "--epochs", "1", "--out", out,
    ]);
    assert_eq!(partial.status.code(), Some(2));
    let sweep = fs::read_to_string(Path::new(out).join("sweep.csv")).unwrap();
    assert!(sweep.contains("failed: "), "{sweep}");
}
