//! Synthetic dense sub-block injection, anomaly-labeled evaluation, and
//! random hyperparameter search.
//!
//! Injection plants random dense blocks into an existing graph with union
//! semantics (no 1-entry of the clean graph is ever removed). Block hashtags
//! are drawn from the graph's empirical usage distribution after add-k
//! smoothing and exponential sharpening, mimicking a coordinated group that
//! tweets a popular subset of hashtags. Random search scores candidate
//! configurations by anomaly F1 against the planted ground truth.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterResult;
use crate::error::{Error, Result};
use crate::graph::{BinaryAttributedGraph, NodeSubset};
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::scalar::Scalar;
use crate::seeding;

/// Parameters of one injection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionSpec {
    pub num_blocks: usize,
    pub block_size: usize,
    /// Probability of each ordered within-block pair receiving an edge.
    pub adj_density: f64,
    /// Probability of each (block node, block hashtag) entry being set.
    pub attr_density: f64,
    /// Add-k smoothing constant for the empirical hashtag distribution.
    pub smoothing_k: f64,
    /// Exponential sharpening factor applied to the smoothed distribution.
    pub sharpen_lambda: f64,
    /// Number of distinct hashtag columns drawn per block.
    pub hashtags_per_block: usize,
    pub seed: u64,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            num_blocks: 3,
            block_size: 500,
            adj_density: 0.3,
            attr_density: 0.3,
            smoothing_k: 1.0,
            sharpen_lambda: 10.0,
            hashtags_per_block: 20,
            seed: 42,
        }
    }
}

impl InjectionSpec {
    pub fn validate(&self, graph: &BinaryAttributedGraph) -> Result<()> {
        if self.num_blocks == 0 || self.block_size == 0 {
            return Err(Error::InvalidParameter(
                "num_blocks and block_size must be >= 1".into(),
            ));
        }
        if self.num_blocks * self.block_size > graph.node_count() {
            return Err(Error::InvalidParameter(format!(
                "{} blocks of {} nodes exceed the graph's {} nodes",
                self.num_blocks,
                self.block_size,
                graph.node_count()
            )));
        }
        if self.hashtags_per_block > graph.attribute_count() {
            return Err(Error::InvalidParameter(format!(
                "hashtags_per_block {} exceeds attribute count {}",
                self.hashtags_per_block,
                graph.attribute_count()
            )));
        }
        for (name, v) in [("adj_density", self.adj_density), ("attr_density", self.attr_density)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0,1], got {v}"
                )));
            }
        }
        if !(self.smoothing_k > 0.0) {
            return Err(Error::InvalidParameter("smoothing_k must be > 0".into()));
        }
        if !(self.sharpen_lambda >= 0.0) {
            return Err(Error::InvalidParameter("sharpen_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Node-level anomaly labels and per-block membership of one injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub anomaly_labels: Vec<u8>,
    pub block_memberships: Vec<NodeSubset>,
    pub block_attributes: Vec<NodeSubset>,
}

/// Smoothed and sharpened hashtag sampling distribution:
/// q_i ∝ exp(λ · (count_i + k)/(Σcounts + k·d)). With λ = 0 this is uniform.
pub fn hashtag_distribution(
    graph: &BinaryAttributedGraph,
    smoothing_k: f64,
    sharpen_lambda: f64,
) -> Vec<f64> {
    let counts = graph.attributes().column_counts();
    let d = counts.len();
    let total: f64 = counts.iter().sum::<usize>() as f64 + smoothing_k * d as f64;
    let mut q: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let smoothed = (c as f64 + smoothing_k) / total;
            (sharpen_lambda * smoothed).exp()
        })
        .collect();
    let norm: f64 = q.iter().sum();
    for v in q.iter_mut() {
        *v /= norm;
    }
    q
}

fn weighted_sample_without_replacement(
    weights: &[f64],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..weights.len()).collect();
    let mut live: Vec<f64> = weights.to_vec();
    let mut total: f64 = live.iter().sum();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = rng.random::<f64>() * total;
        let mut pick = live.len() - 1;
        for (idx, &w) in live.iter().enumerate() {
            if x < w {
                pick = idx;
                break;
            }
            x -= w;
        }
        chosen.push(indices[pick]);
        total -= live[pick];
        indices.swap_remove(pick);
        live.swap_remove(pick);
    }
    chosen
}

/// Plants `num_blocks` disjoint dense sub-blocks into the graph.
///
/// Per block: members are drawn uniformly without replacement; each ordered
/// member pair gets an edge with probability `adj_density`; hashtag columns
/// are drawn from [`hashtag_distribution`] (computed on the input graph) and
/// each (member, hashtag) entry is set with probability `attr_density`.
/// Existing 1-entries are always kept. Deterministic given `spec.seed`.
pub fn inject(
    graph: &BinaryAttributedGraph,
    spec: &InjectionSpec,
) -> Result<(BinaryAttributedGraph, GroundTruth)> {
    spec.validate(graph)?;
    let n = graph.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(spec.seed, seeding::tags::INJECT));

    // choose all block members in one pass (disjoint across blocks)
    let total_members = spec.num_blocks * spec.block_size;
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..total_members {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }

    let mut adjacency = graph.adjacency().clone();
    let mut attributes = graph.attributes().clone();
    let distribution = hashtag_distribution(graph, spec.smoothing_k, spec.sharpen_lambda);

    let mut anomaly_labels = vec![0u8; n];
    let mut block_memberships = Vec::with_capacity(spec.num_blocks);
    let mut block_attributes = Vec::with_capacity(spec.num_blocks);

    for block in 0..spec.num_blocks {
        let members = NodeSubset::new(
            pool[block * spec.block_size..(block + 1) * spec.block_size].to_vec(),
        );
        for v in members.iter() {
            anomaly_labels[v] = 1;
        }
        for u in members.iter() {
            for v in members.iter() {
                if u != v && rng.random::<f64>() < spec.adj_density {
                    adjacency.insert(u, v);
                }
            }
        }
        let hashtags = NodeSubset::new(weighted_sample_without_replacement(
            &distribution,
            spec.hashtags_per_block,
            &mut rng,
        ));
        for u in members.iter() {
            for tag in hashtags.iter() {
                if rng.random::<f64>() < spec.attr_density {
                    attributes.insert(u, tag);
                }
            }
        }
        block_memberships.push(members);
        block_attributes.push(hashtags);
    }

    let injected = BinaryAttributedGraph::from_matrices(
        graph.node_ids().to_vec(),
        graph.attribute_names().to_vec(),
        adjacency,
        attributes,
    )?;
    Ok((
        injected,
        GroundTruth {
            anomaly_labels,
            block_memberships,
            block_attributes,
        },
    ))
}

/// Directed Erdős–Rényi background with iid attribute activation, giving the
/// benchmarks a stand-in for real follower data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub nodes: usize,
    pub attributes: usize,
    pub edge_probability: f64,
    pub attribute_probability: f64,
    pub seed: u64,
}

pub fn generate_background(spec: &BackgroundSpec) -> Result<BinaryAttributedGraph> {
    if spec.nodes < 2 || spec.attributes == 0 {
        return Err(Error::InvalidParameter(
            "background needs >= 2 nodes and >= 1 attribute".into(),
        ));
    }
    for (name, p) in [
        ("edge_probability", spec.edge_probability),
        ("attribute_probability", spec.attribute_probability),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in [0,1], got {p}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(spec.seed, seeding::tags::BACKGROUND));
    let node_ids = (0..spec.nodes).map(|i| format!("n{i}")).collect();
    let attribute_names = (0..spec.attributes).map(|j| format!("#h{j}")).collect();

    let mut edges = Vec::new();
    for i in 0..spec.nodes {
        for j in 0..spec.nodes {
            if i != j && rng.random::<f64>() < spec.edge_probability {
                edges.push((i, j));
            }
        }
    }
    let mut attrs = Vec::new();
    for i in 0..spec.nodes {
        for j in 0..spec.attributes {
            if rng.random::<f64>() < spec.attribute_probability {
                attrs.push((i, j));
            }
        }
    }
    BinaryAttributedGraph::from_parts(node_ids, attribute_names, &edges, &attrs)
}

/// Confusion-matrix summary over the anomaly class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

pub fn evaluate_binary(predicted: &[u8], actual: &[u8]) -> Result<EvalMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &a) in predicted.iter().zip(actual.iter()) {
        match (p != 0, a != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalMetrics {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

/// F1 over the anomaly class; 0 when precision + recall is 0.
pub fn f1_anomaly(predicted: &[u8], truth: &GroundTruth) -> Result<f64> {
    Ok(evaluate_binary(predicted, &truth.anomaly_labels)?.f1)
}

/// A node is anomalous iff it belongs to one of the top-k clusters whose
/// induced density is at least `t`.
pub fn predict_anomalies(
    graph: &BinaryAttributedGraph,
    result: &ClusterResult,
    t: f64,
    k: usize,
) -> Result<Vec<u8>> {
    if result.labels.len() != graph.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "cluster result covers {} nodes, graph has {}",
            result.labels.len(),
            graph.node_count()
        )));
    }
    let mut flagged = vec![0u8; graph.node_count()];
    for &cluster_id in result.top_k.iter().take(k) {
        if result.induced_densities[cluster_id] >= t {
            for (node, &label) in result.labels.iter().enumerate() {
                if label == cluster_id as i64 {
                    flagged[node] = 1;
                }
            }
        }
    }
    Ok(flagged)
}

/// Continuous search range, sampled linearly or log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRange {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log: bool,
}

impl ContinuousRange {
    pub fn linear(lo: f64, hi: f64) -> Self {
        ContinuousRange { lo, hi, log: false }
    }

    pub fn log_uniform(lo: f64, hi: f64) -> Self {
        ContinuousRange { lo, hi, log: true }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::InvalidParameter(format!(
                "{name}: invalid range [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.log && self.lo <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name}: log-uniform range requires lo > 0"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u = rng.random::<f64>();
        if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

fn pick<T: Copy>(options: &[T], rng: &mut impl Rng) -> T {
    options[rng.random_range(0..options.len())]
}

/// Ranges and choice lists for every searchable hyperparameter. Fields are
/// sampled in declaration order, one draw each, so a fixed RNG stream maps
/// to exactly one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub w_a: ContinuousRange,
    pub w_x: ContinuousRange,
    pub w_recon: ContinuousRange,
    pub w_sim: ContinuousRange,
    pub lambda: ContinuousRange,
    pub l2: ContinuousRange,
    pub attention_beta: ContinuousRange,
    pub learning_rate: ContinuousRange,
    pub epochs: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub latent_dim: Vec<usize>,
    pub hidden_a: Vec<usize>,
    pub hidden_x: Vec<usize>,
    pub sampler: Vec<crate::autoencoder::SamplerKind>,
    pub out_dims: Vec<usize>,
    pub eps: ContinuousRange,
    pub min_pts: Vec<usize>,
    pub density_threshold: ContinuousRange,
    pub top_k: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        use crate::autoencoder::SamplerKind;
        SearchSpace {
            w_a: ContinuousRange::log_uniform(0.3, 3.0),
            w_x: ContinuousRange::log_uniform(0.3, 3.0),
            w_recon: ContinuousRange::log_uniform(0.3, 3.0),
            w_sim: ContinuousRange::log_uniform(0.3, 3.0),
            lambda: ContinuousRange::log_uniform(0.5, 2.0),
            l2: ContinuousRange::log_uniform(1e-6, 1e-3),
            attention_beta: ContinuousRange::linear(3.0, 8.0),
            learning_rate: ContinuousRange::log_uniform(4e-4, 1e-3),
            epochs: vec![400, 600],
            batch_size: vec![24, 32],
            latent_dim: vec![16, 32],
            hidden_a: vec![64],
            hidden_x: vec![64],
            sampler: vec![SamplerKind::Uniform, SamplerKind::SimilarityWeighted],
            out_dims: vec![2],
            eps: ContinuousRange::log_uniform(0.5, 2.0),
            min_pts: vec![2, 3],
            density_threshold: ContinuousRange::linear(0.1, 0.3),
            top_k: vec![5, 10],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.w_a.validate("w_a")?;
        self.w_x.validate("w_x")?;
        self.w_recon.validate("w_recon")?;
        self.w_sim.validate("w_sim")?;
        self.lambda.validate("lambda")?;
        self.l2.validate("l2")?;
        self.attention_beta.validate("attention_beta")?;
        self.learning_rate.validate("learning_rate")?;
        self.eps.validate("eps")?;
        self.density_threshold.validate("density_threshold")?;
        for (name, list_empty) in [
            ("epochs", self.epochs.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
            ("latent_dim", self.latent_dim.is_empty()),
            ("hidden_a", self.hidden_a.is_empty()),
            ("hidden_x", self.hidden_x.is_empty()),
            ("sampler", self.sampler.is_empty()),
            ("out_dims", self.out_dims.is_empty()),
            ("min_pts", self.min_pts.is_empty()),
            ("top_k", self.top_k.is_empty()),
        ] {
            if list_empty {
                return Err(Error::InvalidParameter(format!(
                    "search space list {name} must not be empty"
                )));
            }
        }
        Ok(())
    }

    /// Draws one candidate configuration. The training seed is left at its
    /// default; [`random_search`] assigns the per-trial seed.
    pub fn sample(&self, rng: &mut impl Rng) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.weights.w_a = self.w_a.sample(rng);
        config.weights.w_x = self.w_x.sample(rng);
        config.weights.w_recon = self.w_recon.sample(rng);
        config.weights.w_sim = self.w_sim.sample(rng);
        config.weights.lambda = self.lambda.sample(rng);
        config.weights.l2 = self.l2.sample(rng);
        config.weights.attention_beta = self.attention_beta.sample(rng);
        config.train.learning_rate = self.learning_rate.sample(rng);
        config.train.epochs = pick(&self.epochs, rng);
        config.train.batch_size = pick(&self.batch_size, rng);
        config.train.latent_dim = pick(&self.latent_dim, rng);
        config.train.hidden_a = pick(&self.hidden_a, rng);
        config.train.hidden_x = pick(&self.hidden_x, rng);
        config.train.sampler = pick(&self.sampler, rng);
        config.out_dims = pick(&self.out_dims, rng);
        config.eps = self.eps.sample(rng);
        config.min_pts = pick(&self.min_pts, rng);
        config.density_threshold = self.density_threshold.sample(rng);
        config.top_k = pick(&self.top_k, rng);
        config
    }
}

/// One search trial: the sampled configuration and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: PipelineConfig,
    pub f1: f64,
    pub runtime_s: f64,
    /// Present when the trial failed (e.g. diverged); such trials score 0.
    pub error: Option<String>,
}

/// Outcome of [`random_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_trial: usize,
    pub best_f1: f64,
    pub best_config: PipelineConfig,
    pub trials: Vec<TrialRecord>,
}

/// Random hyperparameter search: each trial plants a fresh injection into the
/// clean graph (trial seed = `seed + trial`), samples a configuration from
/// the space, runs the full pipeline, and records the anomaly F1. Failed
/// trials are logged with F1 = 0 rather than aborting the search.
pub fn random_search<S: Scalar>(
    clean: &BinaryAttributedGraph,
    spec: &InjectionSpec,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    space.validate()?;
    spec.validate(clean)?;

    let mut records = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let mut config_rng =
            ChaCha8Rng::seed_from_u64(seeding::derive(trial_seed, seeding::tags::SEARCH_CONFIG));
        let mut config = space.sample(&mut config_rng);
        config.train.seed = trial_seed;
        let trial_spec = InjectionSpec {
            seed: trial_seed,
            ..spec.clone()
        };

        let started = std::time::Instant::now();
        let scored = run_trial::<S>(clean, &trial_spec, &config);
        let runtime_s = started.elapsed().as_secs_f64();
        let (f1, error) = match scored {
            Ok(f1) => (f1, None),
            Err(e) => (0.0, Some(e.to_string())),
        };
        records.push(TrialRecord {
            trial,
            config,
            f1,
            runtime_s,
            error,
        });
    }

    let best_trial = records
        .iter()
        .enumerate()
        .max_by(|(ai, a), (bi, b)| {
            a.f1.partial_cmp(&b.f1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(bi.cmp(ai)) // ties favor the earlier trial
        })
        .map(|(i, _)| i)
        .expect("at least one trial");
    Ok(SearchResult {
        best_trial,
        best_f1: records[best_trial].f1,
        best_config: records[best_trial].config.clone(),
        trials: records,
    })
}

fn run_trial<S: Scalar>(
    clean: &BinaryAttributedGraph,
    spec: &InjectionSpec,
    config: &PipelineConfig,
) -> Result<f64> {
    let (injected, truth) = inject(clean, spec)?;
    let run = run_pipeline::<S>(&injected, config)?;
    let predicted = predict_anomalies(
        &injected,
        &run.clusters,
        config.density_threshold,
        config.top_k,
    )?;
    f1_anomaly(&predicted, &truth)
}

/// Scores an existing clustering against a ground truth, mirroring the
/// search's prediction rule.
pub fn score_clustering(
    graph: &BinaryAttributedGraph,
    clusters: &ClusterResult,
    truth: &GroundTruth,
    t: f64,
    k: usize,
) -> Result<EvalMetrics> {
    let predicted = predict_anomalies(graph, clusters, t, k)?;
    evaluate_binary(&predicted, &truth.anomaly_labels)
}

/// Writes ground truth as CSV `node_id,label`.
pub fn write_ground_truth_csv(
    truth: &GroundTruth,
    node_ids: &[String],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "node_id,label")?;
    for (id, &label) in node_ids.iter().zip(truth.anomaly_labels.iter()) {
        writeln!(out, "{id},{label}")?;
    }
    Ok(())
}

/// Reads a `node_id,label` CSV back into labels aligned with the graph's
/// node order. Every graph node must appear exactly once.
pub fn read_ground_truth_csv(
    reader: impl BufRead,
    graph: &BinaryAttributedGraph,
) -> Result<Vec<u8>> {
    let mut labels = vec![None::<u8>; graph.node_count()];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<ground truth csv>", e))?;
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let (id, value) = line.rsplit_once(',').ok_or_else(|| Error::MalformedLine {
            path: "<ground truth csv>".into(),
            line: lineno + 1,
            reason: "expected node_id,label".into(),
        })?;
        let index = graph.index_of(id).ok_or_else(|| Error::MalformedLine {
            path: "<ground truth csv>".into(),
            line: lineno + 1,
            reason: format!("unknown node id {id:?}"),
        })?;
        let label: u8 = value.parse().map_err(|_| Error::MalformedLine {
            path: "<ground truth csv>".into(),
            line: lineno + 1,
            reason: format!("label must be 0 or 1, got {value:?}"),
        })?;
        labels[index] = Some(label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::InvalidParameter(format!("node index {i} missing from ground truth")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_background(seed: u64) -> BinaryAttributedGraph {
        generate_background(&BackgroundSpec {
            nodes: 60,
            attributes: 20,
            edge_probability: 0.03,
            attribute_probability: 0.05,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn background_generator_is_deterministic_without_self_loops() {
        let a = small_background(1);
        let b = small_background(1);
        assert_eq!(a, b);
        for i in 0..a.node_count() {
            assert!(!a.has_edge(i, i));
        }
        let c = small_background(2);
        assert_ne!(a, c);
    }

    #[test]
    fn inject_full_density_block_is_complete() {
        let g = small_background(3);
        let spec = InjectionSpec {
            num_blocks: 1,
            block_size: 3,
            adj_density: 1.0,
            attr_density: 1.0,
            hashtags_per_block: 4,
            seed: 5,
            ..InjectionSpec::default()
        };
        let (injected, truth) = inject(&g, &spec).unwrap();
        let block = &truth.block_memberships[0];
        assert_eq!(injected.induced_density(block).unwrap(), 1.0);
        assert_eq!(
            injected
                .bipartite_density(block, &truth.block_attributes[0])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn inject_zero_density_leaves_graph_unchanged_but_labels_blocks() {
        let g = small_background(4);
        let spec = InjectionSpec {
            num_blocks: 2,
            block_size: 5,
            adj_density: 0.0,
            attr_density: 0.0,
            hashtags_per_block: 3,
            seed: 6,
            ..InjectionSpec::default()
        };
        let (injected, truth) = inject(&g, &spec).unwrap();
        assert_eq!(injected, g);
        assert_eq!(
            truth.anomaly_labels.iter().map(|&l| l as usize).sum::<usize>(),
            10
        );
    }

    #[test]
    fn inject_blocks_are_disjoint_and_match_labels() {
        let g = small_background(7);
        let spec = InjectionSpec {
            num_blocks: 3,
            block_size: 7,
            adj_density: 0.5,
            attr_density: 0.5,
            hashtags_per_block: 5,
            seed: 8,
            ..InjectionSpec::default()
        };
        let (_, truth) = inject(&g, &spec).unwrap();
        let mut seen = std::collections::HashSet::new();
        for block in &truth.block_memberships {
            for v in block.iter() {
                assert!(seen.insert(v), "node {v} appears in two blocks");
                assert_eq!(truth.anomaly_labels[v], 1);
            }
        }
        assert_eq!(
            seen.len(),
            truth.anomaly_labels.iter().filter(|&&l| l == 1).count()
        );
    }

    #[test]
    fn inject_is_deterministic_per_seed() {
        let g = small_background(9);
        let spec = InjectionSpec {
            num_blocks: 2,
            block_size: 4,
            seed: 11,
            hashtags_per_block: 3,
            ..InjectionSpec::default()
        };
        let (g1, t1) = inject(&g, &spec).unwrap();
        let (g2, t2) = inject(&g, &spec).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1, t2);
        let other = InjectionSpec { seed: 12, ..spec };
        let (g3, _) = inject(&g, &other).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn inject_hits_requested_density_within_tolerance() {
        // empty background so the measured density is the injected one
        let n = 1000;
        let ids = (0..n).map(|i| format!("n{i}")).collect::<Vec<_>>();
        let names = (0..50).map(|j| format!("#h{j}")).collect::<Vec<_>>();
        let g = BinaryAttributedGraph::from_parts(ids, names, &[], &[(0, 0)]).unwrap();
        for seed in 0..5u64 {
            let spec = InjectionSpec {
                num_blocks: 1,
                block_size: 500,
                adj_density: 0.4,
                attr_density: 0.2,
                hashtags_per_block: 10,
                seed,
                ..InjectionSpec::default()
            };
            let (injected, truth) = inject(&g, &spec).unwrap();
            let measured = injected
                .induced_density(&truth.block_memberships[0])
                .unwrap();
            assert!(
                (measured - 0.4).abs() <= 0.02,
                "seed {seed}: measured {measured}"
            );
        }
    }

    #[test]
    fn sharpening_zero_gives_uniform_distribution() {
        let g = small_background(10);
        let q = hashtag_distribution(&g, 1.0, 0.0);
        let expected = 1.0 / q.len() as f64;
        for v in &q {
            assert!((v - expected).abs() < 1e-12);
        }
        // positive sharpening favors the most used column
        let counts = g.attributes().column_counts();
        let max_col = (0..counts.len()).max_by_key(|&j| counts[j]).unwrap();
        let min_col = (0..counts.len()).min_by_key(|&j| counts[j]).unwrap();
        let sharpened = hashtag_distribution(&g, 1.0, 50.0);
        assert!(sharpened[max_col] > sharpened[min_col]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inject_never_removes_entries(seed in 0u64..500, adj in 0.0f64..1.0, attr in 0.0f64..1.0) {
            let g = small_background(42);
            let spec = InjectionSpec {
                num_blocks: 2,
                block_size: 6,
                adj_density: adj,
                attr_density: attr,
                hashtags_per_block: 4,
                seed,
                ..InjectionSpec::default()
            };
            let (injected, _) = inject(&g, &spec).unwrap();
            for (i, j) in g.adjacency().iter_entries() {
                prop_assert!(injected.has_edge(i, j));
            }
            for (i, j) in g.attributes().iter_entries() {
                prop_assert!(injected.attributes().contains(i, j));
            }
        }

        #[test]
        fn f1_matches_confusion_matrix_oracle(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..1000)
        ) {
            let predicted: Vec<u8> = pairs.iter().map(|&(p, _)| p).collect();
            let actual: Vec<u8> = pairs.iter().map(|&(_, a)| a).collect();
            let metrics = evaluate_binary(&predicted, &actual).unwrap();
            // independent oracle straight from the definition
            let tp = pairs.iter().filter(|&&(p, a)| p == 1 && a == 1).count() as f64;
            let fp = pairs.iter().filter(|&&(p, a)| p == 1 && a == 0).count() as f64;
            let fn_ = pairs.iter().filter(|&&(p, a)| p == 0 && a == 1).count() as f64;
            let expected = if 2.0 * tp + fp + fn_ == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            };
            prop_assert!((metrics.f1 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_trivial_cases() {
        let truth = GroundTruth {
            anomaly_labels: vec![1, 1, 0, 0],
            block_memberships: vec![NodeSubset::new(vec![0, 1])],
            block_attributes: vec![NodeSubset::new(vec![0])],
        };
        assert_eq!(f1_anomaly(&[1, 1, 0, 0], &truth).unwrap(), 1.0);
        assert_eq!(f1_anomaly(&[0, 0, 0, 0], &truth).unwrap(), 0.0);
        // P = 0.5, R = 1.0 → F1 = 2/3
        let f1 = f1_anomaly(&[1, 1, 1, 1], &truth).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(f1_anomaly(&[1, 0], &truth).is_err());
    }

    fn clustered_graph() -> (BinaryAttributedGraph, ClusterResult) {
        // cluster 0 = dense triangle {0,1,2}; cluster 1 = sparse pair {3,4}
        let ids = (0..6).map(|i| format!("n{i}")).collect();
        let edges = vec![(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1), (3, 4)];
        let g = BinaryAttributedGraph::from_parts(ids, vec!["#x".into()], &edges, &[(0, 0)])
            .unwrap();
        let labels = vec![0, 0, 0, 1, 1, -1];
        let result = crate::cluster::rank_clusters(&g, &labels, 5, 0.3).unwrap();
        (g, result)
    }

    #[test]
    fn predict_anomalies_applies_threshold_and_k() {
        let (g, result) = clustered_graph();
        // densities: cluster 0 = 1.0, cluster 1 = 0.5
        let both = predict_anomalies(&g, &result, 0.3, 2).unwrap();
        assert_eq!(both, vec![1, 1, 1, 1, 1, 0]);
        let only_first = predict_anomalies(&g, &result, 0.75, 2).unwrap();
        assert_eq!(only_first, vec![1, 1, 1, 0, 0, 0]);
        let top1 = predict_anomalies(&g, &result, 0.3, 1).unwrap();
        assert_eq!(top1, vec![1, 1, 1, 0, 0, 0]);
        // t = 1.0 still keeps the complete triangle
        let strict = predict_anomalies(&g, &result, 1.0, 2).unwrap();
        assert_eq!(strict, vec![1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn predict_anomalies_empty_when_no_cluster_passes() {
        let (g, mut result) = clustered_graph();
        result.induced_densities = vec![0.2, 0.1];
        let none = predict_anomalies(&g, &result, 0.5, 2).unwrap();
        assert!(none.iter().all(|&v| v == 0));
    }

    #[test]
    fn search_space_samples_within_bounds() {
        let space = SearchSpace::default();
        space.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let config = space.sample(&mut rng);
            config.validate().unwrap();
            assert!(config.weights.w_a >= space.w_a.lo && config.weights.w_a <= space.w_a.hi);
            assert!(config.eps >= space.eps.lo && config.eps <= space.eps.hi);
            assert!(space.epochs.contains(&config.train.epochs));
            assert!(space.top_k.contains(&config.top_k));
        }
    }

    fn tiny_search_setup() -> (BinaryAttributedGraph, InjectionSpec, SearchSpace) {
        let g = generate_background(&BackgroundSpec {
            nodes: 50,
            attributes: 12,
            edge_probability: 0.02,
            attribute_probability: 0.05,
            seed: 21,
        })
        .unwrap();
        let spec = InjectionSpec {
            num_blocks: 1,
            block_size: 10,
            adj_density: 0.8,
            attr_density: 0.8,
            hashtags_per_block: 4,
            seed: 0,
            ..InjectionSpec::default()
        };
        let space = SearchSpace {
            epochs: vec![40],
            batch_size: vec![8],
            latent_dim: vec![4],
            hidden_a: vec![8],
            hidden_x: vec![8],
            out_dims: vec![2],
            min_pts: vec![3],
            top_k: vec![3],
            ..SearchSpace::default()
        };
        (g, spec, space)
    }

    #[test]
    fn random_search_logs_every_trial_and_reports_the_max() {
        let (g, spec, space) = tiny_search_setup();
        let result = random_search::<f64>(&g, &spec, &space, 3, 7).unwrap();
        assert_eq!(result.trials.len(), 3);
        let max = result
            .trials
            .iter()
            .map(|t| t.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(result.best_f1, max);
        assert_eq!(result.best_config, result.trials[result.best_trial].config);

        // single-trial search returns that trial's config
        let single = random_search::<f64>(&g, &spec, &space, 1, 7).unwrap();
        assert_eq!(single.best_trial, 0);
        assert_eq!(single.best_config, single.trials[0].config);
    }

    #[test]
    fn random_search_is_deterministic_modulo_runtime() {
        let (g, spec, space) = tiny_search_setup();
        let a = random_search::<f64>(&g, &spec, &space, 2, 13).unwrap();
        let b = random_search::<f64>(&g, &spec, &space, 2, 13).unwrap();
        assert_eq!(a.best_trial, b.best_trial);
        assert_eq!(a.best_f1, b.best_f1);
        for (ta, tb) in a.trials.iter().zip(b.trials.iter()) {
            assert_eq!(ta.config, tb.config);
            assert_eq!(ta.f1, tb.f1);
            assert_eq!(ta.error, tb.error);
        }
    }

    #[test]
    fn ground_truth_csv_round_trip() {
        let g = small_background(30);
        let spec = InjectionSpec {
            num_blocks: 1,
            block_size: 8,
            hashtags_per_block: 3,
            seed: 2,
            ..InjectionSpec::default()
        };
        let (_, truth) = inject(&g, &spec).unwrap();
        let mut buf = Vec::new();
        write_ground_truth_csv(&truth, g.node_ids(), &mut buf).unwrap();
        let labels = read_ground_truth_csv(std::io::Cursor::new(buf), &g).unwrap();
        assert_eq!(labels, truth.anomaly_labels);
    }
}
