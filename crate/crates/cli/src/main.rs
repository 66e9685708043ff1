//! `denseblock` — detects densely connected, attribute-coherent user groups
//! in binary attributed graphs.
//!
//! Stages communicate only via files inside a run directory, so each
//! subcommand can also be run in isolation. Exit codes: 0 success, 1 usage or
//! configuration error, 2 data error, 3 numeric failure (divergence).

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use denseblock_core::autoencoder::SamplerKind;
use denseblock_core::synth::{BackgroundSpec, InjectionSpec};

use denseblock::config::{ConfigError, RunConfig};
use denseblock::manifest::{sha256_hex, Manifest};
use denseblock::stages;

#[derive(Parser)]
#[command(
    name = "denseblock",
    version,
    about = "Dense sub-block detection in binary attributed graphs",
    long_about = "Embeds follower edges and hashtag usage with a joint autoencoder, clusters \
the embeddings with DBSCAN after a PCA reduction, ranks clusters by induced network density, \
and reports per-cluster fingerprints. Defaults live in RunConfig; pass --config to load a JSON \
file and use flags to override individual values (flags win)."
)]
struct Cli {
    /// JSON configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (defaults to $DENSEBLOCK_OUTPUT_ROOT/run-<confighash>,
    /// root falling back to ./runs).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest TSV edge + attribute files into a canonical graph snapshot.
    Ingest(IngestArgs),
    /// Generate a synthetic directed Erdős–Rényi background snapshot.
    Generate(GenerateArgs),
    /// Plant dense sub-blocks into a snapshot; writes the injected snapshot
    /// and node-level ground-truth labels.
    Inject(InjectArgs),
    /// Train the joint autoencoder; writes checkpoint, latent CSV and loss history.
    Train(TrainArgs),
    /// Reduce + DBSCAN + rank clusters by induced density.
    Cluster(ClusterArgs),
    /// Build per-cluster fingerprint reports from an existing clustering.
    Fingerprint(FingerprintArgs),
    /// Full pipeline: ingest → train → cluster → fingerprint, with a MANIFEST.
    Run(RunArgs),
    /// Random hyperparameter search on synthetic injections, scored by F1.
    Search(SearchArgs),
    /// Score an existing run directory against ground truth, including the
    /// greedy dense-subgraph baseline.
    Eval(EvalArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Edge TSV: `src<TAB>dst` per line, `#` comments skipped.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Attribute TSV: `node_id<TAB>attribute_name` per line.
    #[arg(long)]
    attributes: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nodes [default: 1000]
    #[arg(long)]
    nodes: Option<usize>,
    /// Number of attribute columns [default: 200]
    #[arg(long)]
    attributes: Option<usize>,
    /// Directed edge probability [default: 0.01]
    #[arg(long)]
    edge_probability: Option<f64>,
    /// Per-entry attribute activation probability [default: 0.02]
    #[arg(long)]
    attribute_probability: Option<f64>,
    /// Generator seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct InjectFlags {
    /// Number of planted blocks [default: 3]
    #[arg(long)]
    num_blocks: Option<usize>,
    /// Nodes per block [default: 500]
    #[arg(long)]
    block_size: Option<usize>,
    /// Within-block edge probability [default: 0.3]
    #[arg(long)]
    adj_density: Option<f64>,
    /// Within-block attribute probability [default: 0.3]
    #[arg(long)]
    attr_density: Option<f64>,
    /// Add-k smoothing constant for the hashtag distribution [default: 1]
    #[arg(long)]
    smoothing_k: Option<f64>,
    /// Exponential sharpening factor for the hashtag distribution [default: 10]
    #[arg(long)]
    sharpen_lambda: Option<f64>,
    /// Distinct hashtags sampled per block [default: 20]
    #[arg(long)]
    hashtags_per_block: Option<usize>,
    /// Injection seed [default: 42]
    #[arg(long)]
    inject_seed: Option<u64>,
}

impl InjectFlags {
    fn apply(&self, spec: &mut InjectionSpec) {
        if let Some(v) = self.num_blocks {
            spec.num_blocks = v;
        }
        if let Some(v) = self.block_size {
            spec.block_size = v;
        }
        if let Some(v) = self.adj_density {
            spec.adj_density = v;
        }
        if let Some(v) = self.attr_density {
            spec.attr_density = v;
        }
        if let Some(v) = self.smoothing_k {
            spec.smoothing_k = v;
        }
        if let Some(v) = self.sharpen_lambda {
            spec.sharpen_lambda = v;
        }
        if let Some(v) = self.hashtags_per_block {
            spec.hashtags_per_block = v;
        }
        if let Some(v) = self.inject_seed {
            spec.seed = v;
        }
    }
}

#[derive(Args)]
struct InjectArgs {
    /// Graph snapshot to inject into.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    inject: InjectFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    Uniform,
    SimilarityWeighted,
}

impl From<SamplerArg> for SamplerKind {
    fn from(value: SamplerArg) -> Self {
        match value {
            SamplerArg::Uniform => SamplerKind::Uniform,
            SamplerArg::SimilarityWeighted => SamplerKind::SimilarityWeighted,
        }
    }
}

#[derive(Args, Default)]
struct PipelineFlags {
    /// Training iterations (one sampled batch each) [default: 400]
    #[arg(long)]
    epochs: Option<usize>,
    /// Nodes per training batch [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// SGD learning rate [default: 0.0005]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Training seed; drives weight init and batch sampling [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Batch peer sampler [default: similarity-weighted]
    #[arg(long)]
    sampler: Option<SamplerArg>,
    /// Latent embedding dimension k [default: 32]
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Adjacency encoder width [default: 128]
    #[arg(long)]
    hidden_a: Option<usize>,
    /// Attribute encoder width [default: 128]
    #[arg(long)]
    hidden_x: Option<usize>,
    /// Adjacency-side loss weight [default: 1]
    #[arg(long)]
    w_a: Option<f64>,
    /// Attribute-side loss weight [default: 1]
    #[arg(long)]
    w_x: Option<f64>,
    /// Reconstruction loss weight [default: 1]
    #[arg(long)]
    w_recon: Option<f64>,
    /// Similarity loss weight [default: 1]
    #[arg(long)]
    w_sim: Option<f64>,
    /// Similarity transform decay exp(-lambda * distance) [default: 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// L2 weight-decay coefficient [default: 0.0001]
    #[arg(long)]
    l2: Option<f64>,
    /// Reconstruction attention on 1-entries [default: 5]
    #[arg(long)]
    attention_beta: Option<f64>,
    /// Dimensions kept by the PCA reduction [default: 2]
    #[arg(long)]
    out_dims: Option<usize>,
    /// DBSCAN neighborhood radius [default: 0.5]
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN core-point threshold [default: 5]
    #[arg(long)]
    min_pts: Option<usize>,
    /// Induced-density threshold t for dense clusters [default: 0.1]
    #[arg(long = "threshold")]
    density_threshold: Option<f64>,
    /// Number of densest clusters to rank [default: 10]
    #[arg(long)]
    top_k: Option<usize>,
}

impl PipelineFlags {
    fn apply(&self, config: &mut denseblock_core::pipeline::PipelineConfig) {
        if let Some(v) = self.epochs {
            config.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.train.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            config.train.learning_rate = v;
        }
        if let Some(v) = self.seed {
            config.train.seed = v;
        }
        if let Some(v) = self.sampler {
            config.train.sampler = v.into();
        }
        if let Some(v) = self.latent_dim {
            config.train.latent_dim = v;
        }
        if let Some(v) = self.hidden_a {
            config.train.hidden_a = v;
        }
        if let Some(v) = self.hidden_x {
            config.train.hidden_x = v;
        }
        if let Some(v) = self.w_a {
            config.weights.w_a = v;
        }
        if let Some(v) = self.w_x {
            config.weights.w_x = v;
        }
        if let Some(v) = self.w_recon {
            config.weights.w_recon = v;
        }
        if let Some(v) = self.w_sim {
            config.weights.w_sim = v;
        }
        if let Some(v) = self.lambda {
            config.weights.lambda = v;
        }
        if let Some(v) = self.l2 {
            config.weights.l2 = v;
        }
        if let Some(v) = self.attention_beta {
            config.weights.attention_beta = v;
        }
        if let Some(v) = self.out_dims {
            config.out_dims = v;
        }
        if let Some(v) = self.eps {
            config.eps = v;
        }
        if let Some(v) = self.min_pts {
            config.min_pts = v;
        }
        if let Some(v) = self.density_threshold {
            config.density_threshold = v;
        }
        if let Some(v) = self.top_k {
            config.top_k = v;
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Graph snapshot to train on.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct ClusterArgs {
    /// Graph snapshot (for induced densities).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Latent CSV produced by `train`.
    #[arg(long)]
    latent: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct FingerprintArgs {
    /// Graph snapshot.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// cluster_result.json produced by `cluster`.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Popular hashtags per fingerprint [default: 30]
    #[arg(long)]
    fingerprint_m: Option<usize>,
    /// Histogram bins for clustering coefficients [default: 20]
    #[arg(long)]
    fingerprint_bins: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Edge TSV (alternative to --graph).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Attribute TSV (alternative to --graph).
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Pre-ingested graph snapshot.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Popular hashtags per fingerprint [default: 30]
    #[arg(long)]
    fingerprint_m: Option<usize>,
    /// Histogram bins for clustering coefficients [default: 20]
    #[arg(long)]
    fingerprint_bins: Option<usize>,
}

#[derive(Args)]
struct SearchArgs {
    /// Clean graph snapshot to inject into.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    inject: InjectFlags,
    /// Number of random-search trials [default: 30]
    #[arg(long)]
    trials: Option<usize>,
    /// Search seed; trial seeds are derived as seed + trial index [default: 42]
    #[arg(long)]
    search_seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory produced by `run` (or `train`+`cluster`).
    #[arg(long)]
    run_dir: PathBuf,
    /// Ground-truth CSV (`node_id,label`) from `inject`.
    #[arg(long)]
    ground_truth: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 1;
        }
        if let Some(core_err) = cause.downcast_ref::<denseblock_core::Error>() {
            return match core_err {
                denseblock_core::Error::TrainingDiverged { .. }
                | denseblock_core::Error::NonFinite(_) => 3,
                denseblock_core::Error::InvalidParameter(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn load_config(cli_config: &Option<PathBuf>, output: &Option<PathBuf>) -> Result<RunConfig> {
    let mut config = match cli_config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if output.is_some() {
        config.output_dir = output.clone();
    }
    Ok(config)
}

fn config_hash(config: &RunConfig) -> Result<String> {
    Ok(sha256_hex(config.to_hashable_json()?.as_bytes()))
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.config, &cli.output)?;
    match cli.command {
        Command::Ingest(args) => {
            if let Some(edges) = args.edges {
                config.edge_file = Some(edges);
            }
            if let Some(attributes) = args.attributes {
                config.attribute_file = Some(attributes);
            }
            let edges = config
                .edge_file
                .clone()
                .ok_or_else(|| ConfigError("ingest needs --edges (or edge_file in the config)".into()))?;
            let attributes = config.attribute_file.clone().ok_or_else(|| {
                ConfigError("ingest needs --attributes (or attribute_file in the config)".into())
            })?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            let summary = stages::stage_ingest(&edges, &attributes, &dir)?;
            if summary.self_loops_dropped > 0 {
                eprintln!("warning: dropped {} self-loop(s)", summary.self_loops_dropped);
            }
            println!(
                "ingested {} nodes, {} edges, {} attributes -> {}",
                summary.nodes,
                summary.edges,
                summary.attributes,
                dir.join(stages::GRAPH_FILE).display()
            );
            Ok(())
        }
        Command::Generate(args) => {
            let spec = BackgroundSpec {
                nodes: args.nodes.unwrap_or(1000),
                attributes: args.attributes.unwrap_or(200),
                edge_probability: args.edge_probability.unwrap_or(0.01),
                attribute_probability: args.attribute_probability.unwrap_or(0.02),
                seed: args.seed.unwrap_or(42),
            };
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            stages::stage_generate(&spec, &dir)?;
            println!("generated background -> {}", dir.join(stages::GRAPH_FILE).display());
            Ok(())
        }
        Command::Inject(args) => {
            let mut spec = config.injection.clone().unwrap_or_default();
            args.inject.apply(&mut spec);
            config.injection = Some(spec.clone());
            let graph = args
                .graph
                .or_else(|| config.graph_snapshot.clone())
                .ok_or_else(|| ConfigError("inject needs --graph (a snapshot path)".into()))?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            stages::stage_inject(&graph, &spec, &dir)?;
            println!(
                "injected {} block(s) of {} -> {}",
                spec.num_blocks,
                spec.block_size,
                dir.display()
            );
            Ok(())
        }
        Command::Train(args) => {
            args.pipeline.apply(&mut config.pipeline);
            let graph = args
                .graph
                .or_else(|| config.graph_snapshot.clone())
                .ok_or_else(|| ConfigError("train needs --graph (a snapshot path)".into()))?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            stages::ensure_dir(&dir)?;
            stages::stage_train(&graph, &config.pipeline, &dir)?;
            println!("trained -> {}", dir.join(stages::LATENT_FILE).display());
            Ok(())
        }
        Command::Cluster(args) => {
            args.pipeline.apply(&mut config.pipeline);
            let graph = args
                .graph
                .or_else(|| config.graph_snapshot.clone())
                .ok_or_else(|| ConfigError("cluster needs --graph (a snapshot path)".into()))?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            let latent = args.latent.unwrap_or_else(|| dir.join(stages::LATENT_FILE));
            stages::stage_cluster(&graph, &latent, &config.pipeline, &dir)?;
            println!("clustered -> {}", dir.join(stages::RANKING_FILE).display());
            Ok(())
        }
        Command::Fingerprint(args) => {
            if let Some(m) = args.fingerprint_m {
                config.fingerprint.m = m;
            }
            if let Some(bins) = args.fingerprint_bins {
                config.fingerprint.bins = bins;
            }
            let graph = args
                .graph
                .or_else(|| config.graph_snapshot.clone())
                .ok_or_else(|| ConfigError("fingerprint needs --graph (a snapshot path)".into()))?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            let clusters = args
                .clusters
                .unwrap_or_else(|| dir.join(stages::CLUSTER_RESULT_FILE));
            stages::stage_fingerprint(&graph, &clusters, &config.fingerprint, &dir)?;
            println!("report -> {}", dir.join(stages::REPORT_FILE).display());
            Ok(())
        }
        Command::Run(args) => {
            args.pipeline.apply(&mut config.pipeline);
            if let Some(m) = args.fingerprint_m {
                config.fingerprint.m = m;
            }
            if let Some(bins) = args.fingerprint_bins {
                config.fingerprint.bins = bins;
            }
            if let Some(edges) = args.edges {
                config.edge_file = Some(edges);
            }
            if let Some(attributes) = args.attributes {
                config.attribute_file = Some(attributes);
            }
            if let Some(graph) = args.graph {
                config.graph_snapshot = Some(graph);
            }
            cmd_run(&config)
        }
        Command::Search(args) => {
            let mut spec = config.injection.clone().unwrap_or_default();
            args.inject.apply(&mut spec);
            let mut search = config.search.clone().unwrap_or_default();
            if let Some(trials) = args.trials {
                search.trials = trials;
            }
            if let Some(seed) = args.search_seed {
                search.seed = seed;
            }
            config.injection = Some(spec.clone());
            config.search = Some(search.clone());
            let graph = args
                .graph
                .or_else(|| config.graph_snapshot.clone())
                .ok_or_else(|| ConfigError("search needs --graph (a clean snapshot path)".into()))?;
            let dir = config.resolve_output_dir(&config_hash(&config)?);
            stages::stage_search(&graph, &spec, &search.space, search.trials, search.seed, &dir)?;
            println!("search log -> {}", dir.join(stages::TRIAL_LOG_FILE).display());
            Ok(())
        }
        Command::Eval(args) => {
            let dir = cli
                .output
                .clone()
                .unwrap_or_else(|| args.run_dir.clone());
            let report = stages::stage_eval(&args.run_dir, &args.ground_truth, &dir)?;
            println!(
                "pipeline f1 = {:.4} (p = {:.4}, r = {:.4}); baseline f1 = {:.4}",
                report.pipeline.f1,
                report.pipeline.precision,
                report.pipeline.recall,
                report.baseline.f1
            );
            Ok(())
        }
    }
}

/// Full pipeline over one exclusive run directory, with a MANIFEST that
/// records the config hash, seed, and checksums of every stage's outputs.
fn cmd_run(config: &RunConfig) -> Result<()> {
    let hash = config_hash(config)?;
    let dir = config.resolve_output_dir(&hash);
    stages::ensure_dir(&dir)?;
    std::fs::write(
        dir.join(stages::RESOLVED_CONFIG_FILE),
        config.to_canonical_json()?,
    )?;
    let mut manifest = Manifest::new(hash, config.pipeline.train.seed);

    let graph_path = dir.join(stages::GRAPH_FILE);
    let run_stage = |manifest: &mut Manifest, name: &str, action: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        match action() {
            Ok(()) => {
                manifest
                    .record_stage(name, &dir, stages::run_stage_files(name))
                    .with_context(|| format!("stage {name} finished but outputs are missing"))?;
                manifest.save(&dir)?;
                Ok(())
            }
            Err(e) => {
                manifest.record_failure(name, &format!("{e:#}"));
                manifest.save(&dir)?;
                Err(e.context(format!("stage {name} failed")))
            }
        }
    };

    run_stage(&mut manifest, "ingest", &mut || {
        if let Some(snapshot) = &config.graph_snapshot {
            stages::stage_adopt_snapshot(snapshot, &dir).map(|_| ())
        } else {
            let edges = config.edge_file.clone().ok_or_else(|| {
                anyhow::Error::new(ConfigError(
                    "run needs --graph or --edges/--attributes".into(),
                ))
            })?;
            let attributes = config.attribute_file.clone().ok_or_else(|| {
                anyhow::Error::new(ConfigError(
                    "run needs --graph or --edges/--attributes".into(),
                ))
            })?;
            let summary = stages::stage_ingest(&edges, &attributes, &dir)?;
            if summary.self_loops_dropped > 0 {
                eprintln!("warning: dropped {} self-loop(s)", summary.self_loops_dropped);
            }
            Ok(())
        }
    })?;
    run_stage(&mut manifest, "train", &mut || {
        stages::stage_train(&graph_path, &config.pipeline, &dir)
    })?;
    run_stage(&mut manifest, "cluster", &mut || {
        stages::stage_cluster(
            &graph_path,
            &dir.join(stages::LATENT_FILE),
            &config.pipeline,
            &dir,
        )
    })?;
    run_stage(&mut manifest, "fingerprint", &mut || {
        stages::stage_fingerprint(
            &graph_path,
            &dir.join(stages::CLUSTER_RESULT_FILE),
            &config.fingerprint,
            &dir,
        )
    })?;

    manifest.complete = true;
    manifest.save(&dir)?;
    println!("run complete -> {}", dir.display());
    Ok(())
}
