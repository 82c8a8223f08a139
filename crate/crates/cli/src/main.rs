use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use awe_core::neighborhood::{aggregate_rows, lns_layer_report, neighbor_table, Side, DEFAULT_KS};
use awe_core::pooling::AweStore;
use awe_core::ser::{
    emit_report, generate_synthetic_corpus, layer_sweep, run_on_corpus, ConfigOverrides, Corpus, ExperimentConfig,
    Fusion, LayerSelection, LayerSignal, Report, ReportFormat, SynthConfig,
};
use awe_core::store::{validate_manifest, Manifest};
use awe_core::EmbeddingSpaceF64;

#[derive(Parser)]
#[command(name = "awe", version, about = "Acoustic word embeddings: pooling, neighborhoods, emotion recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus manifest and every file it references.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Pool word spans into an AWE store.
    Pool {
        #[arg(long)]
        manifest: PathBuf,
        /// `a..b` (inclusive), a comma list, or `all`.
        #[arg(long, default_value = "all")]
        layers: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Layer-wise mean LNS between AWEs and lexical vectors.
    Lns {
        #[arg(long)]
        awe_store: PathBuf,
        /// Lexical tensor aligned with the store index (defaults to the store's own).
        #[arg(long)]
        lexical: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        min_count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<stem>.series.json`.
        #[arg(long)]
        plot_data: bool,
    },
    /// Lexical vs acoustic nearest neighbours of a few words.
    Neighbors {
        #[arg(long)]
        awe_store: PathBuf,
        #[arg(long)]
        lexical: Option<PathBuf>,
        #[arg(long)]
        layer: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        words: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
    },
    /// Train and score emotion classifiers.
    Ser(SerArgs),
    /// Write a synthetic corpus with known class and word structure.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SerArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "awe")]
    feature: String,
    /// One of none|concat|xattn, a comma list, or `all`.
    #[arg(long, default_value = "none")]
    fusion: String,
    /// Layer index or `all`.
    #[arg(long, default_value = "all")]
    layer: String,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    /// TOML file; its keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    utts: usize,
    #[arg(long, default_value_t = 13)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 5.0)]
    sep: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 80)]
    vocab: usize,
    /// Put the class signal in this layer only.
    #[arg(long)]
    planted_layer: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_layers(spec: &str, n_layers: usize) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok((0..n_layers).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().with_context(|| format!("bad layer range {part:?}"))?;
            let b = b.trim();
            let b: usize = match b.strip_prefix('=') {
                Some(rest) => rest.parse(),
                None => b.parse(),
            }
            .with_context(|| format!("bad layer range {part:?}"))?;
            if a > b {
                bail!("empty layer range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.trim().parse().with_context(|| format!("bad layer {part:?}"))?);
        }
    }
    out.sort_unstable();
    out.dedup();
    if let Some(&l) = out.iter().find(|&&l| l >= n_layers) {
        bail!("layer {l} out of range for {n_layers} layers");
    }
    Ok(out)
}

fn parse_fusions(spec: &str) -> Result<Vec<Fusion>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Fusion::ALL.to_vec());
    }
    spec.split(',').map(|s| Ok(s.parse::<Fusion>()?)).collect()
}

fn manifest_root(path: &Path) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).to_path_buf()
}

fn validate(manifest: &Path) -> Result<bool> {
    let m = Manifest::load(manifest)?;
    let report = validate_manifest(&m, &manifest_root(manifest));
    for p in &report.problems {
        println!("{p}");
    }
    println!(
        "{}: {} utterances, {} problems",
        manifest.display(),
        m.utterances.len(),
        report.problems.len()
    );
    Ok(report.is_clean())
}

fn pool(manifest: &Path, layers: &str, out: &Path) -> Result<()> {
    let m = Manifest::load(manifest)?;
    let layers = parse_layers(layers, m.n_layers)?;
    let store = AweStore::build(&m, &manifest_root(manifest), &layers)?;
    store.save(out)?;
    println!(
        "{} word occurrences x {} layers -> {}",
        store.n_rows(),
        layers.len(),
        out.display()
    );
    Ok(())
}

fn lns(store: &Path, lexical: Option<&Path>, ks: &[usize], min_count: usize, out: &Path, plot: bool) -> Result<()> {
    let store = AweStore::load(store, lexical)?;
    let report = lns_layer_report(&store, ks, min_count)?;
    let format = if plot { ReportFormat::PlotData } else { ReportFormat::Csv };
    for path in emit_report(Report::Lns(&report), format, out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn neighbors(
    store: &Path,
    lexical: Option<&Path>,
    layer: usize,
    words: &[String],
    k: usize,
    min_count: usize,
) -> Result<()> {
    let store = AweStore::load(store, lexical)?;
    let acoustic: EmbeddingSpaceF64 =
        aggregate_rows(Side::Acoustic { layer }, store.words(), store.layer(layer)?, min_count)?;
    let lex: EmbeddingSpaceF64 = aggregate_rows(Side::Lexical, store.words(), &store.lexical, min_count)?;
    let words: Vec<String> = words.iter().map(|w| w.trim().to_lowercase()).collect();
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    print!("{}", neighbor_table(&refs, &acoustic, &lex, k)?);
    Ok(())
}

fn ser(args: SerArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::new(
        args.manifest.clone().unwrap_or_default(),
        args.feature.parse()?,
        Fusion::None,
        args.layer.parse::<LayerSelection>()?,
    );
    let mut fusions = parse_fusions(&args.fusion)?;
    match (args.seeds, args.runs) {
        (Some(seeds), Some(runs)) if seeds.len() != runs => {
            bail!("--runs {runs} but {} seeds given", seeds.len())
        }
        (Some(seeds), _) => cfg.seeds = seeds,
        (None, Some(runs)) => cfg.seeds = (1..=runs as u64).collect(),
        (None, None) => {}
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overrides = ConfigOverrides::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(f) = overrides.fusion {
            fusions = vec![f];
        }
        overrides.apply(&mut cfg)?;
    }
    if cfg.manifest.as_os_str().is_empty() {
        bail!("no manifest given (--manifest or `manifest` in --config)");
    }
    cfg.fusion = fusions[0];
    for &f in &fusions {
        cfg.with_fusion(f).validate()?;
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let resolved = serde_json::json!({ "config": &cfg, "fusions": &fusions });
    fs::write(args.out.join("config.json"), serde_json::to_string_pretty(&resolved)? + "\n")?;

    let corpus = Corpus::load(&cfg.manifest)?;
    let complete = match cfg.layer {
        LayerSelection::All => {
            let sweep = layer_sweep(&corpus, &cfg, &fusions)?;
            emit_report(Report::Sweep(&sweep), ReportFormat::PlotData, args.out.join("sweep.csv"))?;
            emit_report(Report::SweepSummary(&sweep), ReportFormat::Csv, args.out.join("sweep_summary.csv"))?;
            for s in sweep.summaries() {
                println!(
                    "{}/{}: best layer {} (mean WA {:.4}), {} layers failed",
                    s.feature,
                    s.fusion,
                    s.best_layer.map_or_else(|| "-".into(), |l| l.to_string()),
                    s.best_mean_wa,
                    s.layers_failed
                );
            }
            sweep.is_complete()
        }
        LayerSelection::Single(layer) => {
            let mut runs = Vec::new();
            let mut ok = true;
            for &f in &fusions {
                match run_on_corpus(&corpus, &cfg.with_fusion(f), layer) {
                    Ok(r) => {
                        println!(
                            "{}/{} layer {}: mean WA {:.4} +/- {:.4} over {} runs",
                            r.feature,
                            r.fusion,
                            r.layer,
                            r.mean_wa,
                            r.std_wa,
                            r.n_runs()
                        );
                        runs.push(r);
                    }
                    Err(e) => {
                        log::error!("{}/{f} layer {layer}: {e}", cfg.feature);
                        ok = false;
                    }
                }
            }
            emit_report(Report::Runs(&runs), ReportFormat::PlotData, args.out.join("runs.csv"))?;
            ok
        }
    };
    Ok(complete)
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_classes: a.classes,
        n_utterances: a.utts,
        n_layers: a.layers,
        dim: a.dim,
        lexical_dim: a.dim,
        vocab_size: a.vocab,
        noise_std: a.noise,
        separation: a.sep,
        layer_signal: a.planted_layer.map_or(LayerSignal::Uniform, LayerSignal::Planted),
        seed: a.seed,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic_corpus(&cfg, &a.out)?;
    println!(
        "wrote {} utterances to {}",
        corpus.manifest.utterances.len(),
        corpus.manifest_path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { manifest } => validate(&manifest),
        Command::Pool { manifest, layers, out } => pool(&manifest, &layers, &out).map(|_| true),
        Command::Lns {
            awe_store,
            lexical,
            k,
            min_count,
            out,
            plot_data,
        } => lns(&awe_store, lexical.as_deref(), &k, min_count, &out, plot_data).map(|_| true),
        Command::Neighbors {
            awe_store,
            lexical,
            layer,
            words,
            k,
            min_count,
        } => neighbors(&awe_store, lexical.as_deref(), layer, &words, k, min_count).map(|_| true),
        Command::Ser(args) => ser(args),
        Command::Synth(args) => synth(args).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
