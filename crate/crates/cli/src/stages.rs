//! Pipeline stages. Every stage reads its inputs from files and writes its
//! outputs to files, so any stage can be rerun in isolation and `run` is just
//! the stages chained over one directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use denseblock_core::autoencoder::{
    read_latent_csv, save_checkpoint, train, write_latent_csv, LatentMatrix,
};
use denseblock_core::baseline::{baseline_predict, greedy_densest};
use denseblock_core::cluster::{dbscan, rank_clusters, ClusterResult, PcaReducer, Reducer};
use denseblock_core::fingerprint::{cluster_report, ClusterReport};
use denseblock_core::graph::{load_graph, BinaryAttributedGraph};
use denseblock_core::pipeline::PipelineConfig;
use denseblock_core::synth::{
    evaluate_binary, generate_background, inject, random_search, read_ground_truth_csv,
    score_clustering, write_ground_truth_csv, BackgroundSpec, InjectionSpec, SearchSpace,
};

use crate::config::FingerprintConfig;

pub const GRAPH_FILE: &str = "graph.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const INJECTION_FILE: &str = "injection.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LATENT_FILE: &str = "latent.csv";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const RANKING_FILE: &str = "ranking.json";
pub const CLUSTER_RESULT_FILE: &str = "cluster_result.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_HASHTAGS_CSV: &str = "report_hashtags.csv";
pub const REPORT_CLUSTERING_CSV: &str = "report_clustering.csv";
pub const REPORT_AUTHORITY_CSV: &str = "report_authority.csv";
pub const TRIAL_LOG_FILE: &str = "trial_log.csv";
pub const BEST_CONFIG_FILE: &str = "best_config.json";
pub const SEARCH_RESULT_FILE: &str = "search_result.json";
pub const EVAL_FILE: &str = "eval.json";
pub const BASELINE_FILE: &str = "baseline.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// One row of `ranking.json`, in top-k order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub cluster_id: usize,
    pub size: usize,
    pub induced_density: f64,
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub nodes: usize,
    pub attributes: usize,
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn load_snapshot(path: &Path) -> Result<BinaryAttributedGraph> {
    Ok(BinaryAttributedGraph::load_snapshot(path)?)
}

/// Ingests TSV edge + attribute files into the canonical graph snapshot.
pub fn stage_ingest(
    edge_file: &Path,
    attribute_file: &Path,
    dir: &Path,
) -> Result<IngestSummary> {
    ensure_dir(dir)?;
    let loaded = load_graph(edge_file, attribute_file)?;
    loaded.graph.save_snapshot(&dir.join(GRAPH_FILE))?;
    Ok(IngestSummary {
        nodes: loaded.graph.node_count(),
        attributes: loaded.graph.attribute_count(),
        edges: loaded.graph.edge_count(),
        self_loops_dropped: loaded.self_loops_dropped,
        duplicate_edges: loaded.duplicate_edges,
    })
}

/// Generates a synthetic background graph snapshot.
pub fn stage_generate(spec: &BackgroundSpec, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let graph = generate_background(spec)?;
    graph.save_snapshot(&dir.join(GRAPH_FILE))?;
    Ok(())
}

/// Plants dense sub-blocks and writes the injected snapshot + ground truth.
pub fn stage_inject(graph_path: &Path, spec: &InjectionSpec, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let graph = load_snapshot(graph_path)?;
    let (injected, truth) = inject(&graph, spec)?;
    injected.save_snapshot(&dir.join(GRAPH_FILE))?;
    let mut out = BufWriter::new(
        fs::File::create(dir.join(GROUND_TRUTH_FILE)).context("cannot create ground truth csv")?,
    );
    write_ground_truth_csv(&truth, injected.node_ids(), &mut out)?;
    out.flush()?;
    fs::write(dir.join(INJECTION_FILE), serde_json::to_string_pretty(spec)?)?;
    Ok(())
}

/// Trains the autoencoder and writes checkpoint, latent CSV and loss history.
pub fn stage_train(graph_path: &Path, config: &PipelineConfig, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let graph = load_snapshot(graph_path)?;
    let outcome = train::<f64>(&graph, &config.weights, &config.train)?;
    save_checkpoint(
        &outcome.params,
        config.train.seed,
        config.train.epochs,
        &dir.join(CHECKPOINT_FILE),
    )?;
    let mut latent_out = BufWriter::new(
        fs::File::create(dir.join(LATENT_FILE)).context("cannot create latent csv")?,
    );
    write_latent_csv(&outcome.latent, graph.node_ids(), &mut latent_out)?;
    latent_out.flush()?;
    let mut loss_out = BufWriter::new(
        fs::File::create(dir.join(LOSS_FILE)).context("cannot create loss history csv")?,
    );
    writeln!(loss_out, "iteration,total_loss")?;
    for (i, loss) in outcome.loss_history.iter().enumerate() {
        writeln!(loss_out, "{i},{loss}")?;
    }
    loss_out.flush()?;
    Ok(())
}

pub fn write_labels_csv(
    labels: &[i64],
    node_ids: &[String],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "node_id,cluster_label")?;
    for (id, label) in node_ids.iter().zip(labels.iter()) {
        writeln!(out, "{id},{label}")?;
    }
    Ok(())
}

pub fn ranking_entries(result: &ClusterResult) -> Vec<RankingEntry> {
    result
        .top_k
        .iter()
        .map(|&c| RankingEntry {
            cluster_id: c,
            size: result.cluster_sizes[c],
            induced_density: result.induced_densities[c],
            above_threshold: result.above_threshold[c],
        })
        .collect()
}

/// Reduces the latent matrix, clusters it, ranks clusters by density, and
/// persists labels + ranking.
pub fn stage_cluster(
    graph_path: &Path,
    latent_path: &Path,
    config: &PipelineConfig,
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    let graph = load_snapshot(graph_path)?;
    let file = fs::File::open(latent_path)
        .with_context(|| format!("cannot open {}", latent_path.display()))?;
    let (latent, ids): (LatentMatrix<f64>, Vec<String>) =
        read_latent_csv(std::io::BufReader::new(file))?;
    if ids != graph.node_ids() {
        bail!(
            "latent csv node ids do not match the graph snapshot ({} vs {} nodes)",
            ids.len(),
            graph.node_count()
        );
    }
    let reduction = PcaReducer.reduce(&latent.h, config.out_dims)?;
    if reduction.rank_deficient {
        eprintln!("warning: latent matrix is rank deficient; zero-padded the missing components");
    }
    let labels = dbscan(&reduction.projected, config.eps, config.min_pts)?;
    let result = rank_clusters(&graph, &labels, config.top_k, config.density_threshold)?;

    let mut labels_out = BufWriter::new(
        fs::File::create(dir.join(LABELS_FILE)).context("cannot create labels csv")?,
    );
    write_labels_csv(&result.labels, graph.node_ids(), &mut labels_out)?;
    labels_out.flush()?;
    fs::write(
        dir.join(RANKING_FILE),
        serde_json::to_string_pretty(&ranking_entries(&result))?,
    )?;
    fs::write(
        dir.join(CLUSTER_RESULT_FILE),
        serde_json::to_string(&result)?,
    )?;
    Ok(())
}

pub fn load_cluster_result(path: &Path) -> Result<ClusterResult> {
    let raw =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&raw)?)
}

/// Builds the fingerprint report for the ranked clusters and writes the JSON
/// document plus spreadsheet-friendly companion CSVs.
pub fn stage_fingerprint(
    graph_path: &Path,
    cluster_result_path: &Path,
    fingerprint: &FingerprintConfig,
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    let graph = load_snapshot(graph_path)?;
    let result = load_cluster_result(cluster_result_path)?;
    let report = cluster_report(
        &graph,
        &result,
        fingerprint.m.min(graph.attribute_count()),
        fingerprint.bins,
    )?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    write_report_csvs(&report, dir)?;
    Ok(())
}

fn write_report_csvs(report: &ClusterReport, dir: &Path) -> Result<()> {
    let mut hashtags = BufWriter::new(fs::File::create(dir.join(REPORT_HASHTAGS_CSV))?);
    writeln!(hashtags, "cluster_id,hashtag,relative_frequency")?;
    for cluster in &report.clusters {
        let fp = &cluster.hashtag_fingerprint;
        for (name, freq) in fp.hashtag_names.iter().zip(fp.relative_frequency.iter()) {
            writeln!(hashtags, "{},{},{}", cluster.id, csv_field(name), freq)?;
        }
    }
    hashtags.flush()?;

    let mut bins = BufWriter::new(fs::File::create(dir.join(REPORT_CLUSTERING_CSV))?);
    writeln!(bins, "cluster_id,bin_lo,bin_hi,density")?;
    for cluster in &report.clusters {
        if let Some(fp) = &cluster.clustering_fingerprint {
            for (w, d) in fp.bin_edges.windows(2).zip(fp.density.iter()) {
                writeln!(bins, "{},{},{},{}", cluster.id, w[0], w[1], d)?;
            }
        }
    }
    bins.flush()?;

    let mut authority = BufWriter::new(fs::File::create(dir.join(REPORT_AUTHORITY_CSV))?);
    writeln!(authority, "cluster_id,node_id,score")?;
    for cluster in &report.clusters {
        for entry in &cluster.authority {
            writeln!(
                authority,
                "{},{},{}",
                cluster.id,
                csv_field(&entry.node_id),
                entry.score
            )?;
        }
    }
    authority.flush()?;
    Ok(())
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Random hyperparameter search over injected copies of the clean graph.
pub fn stage_search(
    graph_path: &Path,
    spec: &InjectionSpec,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    let clean = load_snapshot(graph_path)?;
    let result = random_search::<f64>(&clean, spec, space, trials, seed)?;

    let mut writer = csv::Writer::from_path(dir.join(TRIAL_LOG_FILE))?;
    writer.write_record(["trial", "config_json", "f1", "runtime_s"])?;
    for trial in &result.trials {
        writer.write_record([
            trial.trial.to_string(),
            serde_json::to_string(&trial.config)?,
            trial.f1.to_string(),
            format!("{:.3}", trial.runtime_s),
        ])?;
    }
    writer.flush()?;

    fs::write(
        dir.join(BEST_CONFIG_FILE),
        serde_json::to_string_pretty(&result.best_config)?,
    )?;
    fs::write(
        dir.join(SEARCH_RESULT_FILE),
        serde_json::to_string_pretty(&result)?,
    )?;
    println!(
        "best trial {} of {}: f1 = {:.4}",
        result.best_trial,
        trials,
        result.best_f1
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pipeline: denseblock_core::synth::EvalMetrics,
    pub baseline: denseblock_core::synth::EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineExport {
    pub selected_node_ids: Vec<String>,
    pub best_score: f64,
}

/// Scores an existing run directory against a ground-truth CSV, including
/// the adjacency-only greedy baseline on the same graph.
pub fn stage_eval(run_dir: &Path, ground_truth: &Path, out_dir: &Path) -> Result<EvalReport> {
    ensure_dir(out_dir)?;
    let graph = load_snapshot(&run_dir.join(GRAPH_FILE))?;
    let result = load_cluster_result(&run_dir.join(CLUSTER_RESULT_FILE))?;
    let gt_file = fs::File::open(ground_truth)
        .with_context(|| format!("cannot open ground truth {}", ground_truth.display()))?;
    let labels = read_ground_truth_csv(std::io::BufReader::new(gt_file), &graph)?;
    let truth = denseblock_core::synth::GroundTruth {
        anomaly_labels: labels,
        block_memberships: Vec::new(),
        block_attributes: Vec::new(),
    };

    let pipeline = score_clustering(&graph, &result, &truth, result.threshold, result.k)?;
    let greedy = greedy_densest(&graph)?;
    let baseline_prediction = baseline_predict(&graph, &greedy);
    let baseline = evaluate_binary(&baseline_prediction, &truth.anomaly_labels)?;

    let report = EvalReport { pipeline, baseline };
    fs::write(out_dir.join(EVAL_FILE), serde_json::to_string_pretty(&report)?)?;
    fs::write(
        out_dir.join(BASELINE_FILE),
        serde_json::to_string_pretty(&BaselineExport {
            selected_node_ids: greedy
                .selected
                .iter()
                .map(|v| graph.node_id(v).to_string())
                .collect(),
            best_score: greedy.best_score,
        })?,
    )?;
    Ok(report)
}

/// Files each `run` stage is expected to produce.
pub fn run_stage_files(stage: &str) -> &'static [&'static str] {
    match stage {
        "ingest" => &[GRAPH_FILE],
        "train" => &[CHECKPOINT_FILE, LATENT_FILE, LOSS_FILE],
        "cluster" => &[LABELS_FILE, RANKING_FILE, CLUSTER_RESULT_FILE],
        "fingerprint" => &[
            REPORT_FILE,
            REPORT_HASHTAGS_CSV,
            REPORT_CLUSTERING_CSV,
            REPORT_AUTHORITY_CSV,
        ],
        _ => &[],
    }
}

/// Copies (re-serializes) an existing snapshot into the run directory so the
/// run is self-contained.
pub fn stage_adopt_snapshot(graph_path: &Path, dir: &Path) -> Result<IngestSummary> {
    ensure_dir(dir)?;
    let graph = load_snapshot(graph_path)?;
    graph.save_snapshot(&dir.join(GRAPH_FILE))?;
    Ok(IngestSummary {
        nodes: graph.node_count(),
        attributes: graph.attribute_count(),
        edges: graph.edge_count(),
        self_loops_dropped: 0,
        duplicate_edges: 0,
    })
}
