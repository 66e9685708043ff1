//! End-to-end embedding pipeline: train → reduce → cluster → rank. Shared by
//! the CLI's `run` stage and the hyperparameter search harness.

use serde::{Deserialize, Serialize};

use crate::autoencoder::{train, LossWeights, TrainConfig, TrainOutcome};
use crate::cluster::{dbscan, rank_clusters, ClusterResult, PcaReducer, Reducer, Reduction};
use crate::error::Result;
use crate::graph::BinaryAttributedGraph;
use crate::scalar::Scalar;

/// Every knob of the embedding → clustering → ranking pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub weights: LossWeights,
    pub train: TrainConfig,
    /// Dimensions kept by the reduction stage.
    pub out_dims: usize,
    /// DBSCAN neighborhood radius on the reduced embedding.
    pub eps: f64,
    /// DBSCAN core-point threshold.
    pub min_pts: usize,
    /// Induced-density threshold t for flagging dense clusters.
    pub density_threshold: f64,
    /// Number of densest clusters to rank and report.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            weights: LossWeights::default(),
            train: TrainConfig::default(),
            out_dims: 2,
            eps: 0.5,
            min_pts: 5,
            density_threshold: 0.1,
            top_k: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.train.validate()?;
        if self.out_dims == 0 || self.out_dims > self.train.latent_dim {
            return Err(crate::Error::InvalidParameter(format!(
                "out_dims must be in 1..={}, got {}",
                self.train.latent_dim, self.out_dims
            )));
        }
        if !(self.eps > 0.0) {
            return Err(crate::Error::InvalidParameter("eps must be > 0".into()));
        }
        if self.min_pts == 0 {
            return Err(crate::Error::InvalidParameter("min_pts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.density_threshold) {
            return Err(crate::Error::InvalidParameter(
                "density_threshold must lie in [0,1]".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(crate::Error::InvalidParameter("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// All stage outputs of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun<S> {
    pub training: TrainOutcome<S>,
    pub reduction: Reduction<S>,
    pub clusters: ClusterResult,
}

/// Runs the full pipeline on a graph with the default PCA reduction stage.
pub fn run_pipeline<S: Scalar>(
    graph: &BinaryAttributedGraph,
    config: &PipelineConfig,
) -> Result<PipelineRun<S>> {
    run_pipeline_with(graph, config, &PcaReducer)
}

/// Same as [`run_pipeline`] but with a caller-supplied reduction stage.
pub fn run_pipeline_with<S: Scalar>(
    graph: &BinaryAttributedGraph,
    config: &PipelineConfig,
    reducer: &dyn Reducer<S>,
) -> Result<PipelineRun<S>> {
    config.validate()?;
    let training = train::<S>(graph, &config.weights, &config.train)?;
    let reduction = reducer.reduce(&training.latent.h, config.out_dims)?;
    let labels = dbscan(&reduction.projected, config.eps, config.min_pts)?;
    let clusters = rank_clusters(graph, &labels, config.top_k, config.density_threshold)?;
    Ok(PipelineRun {
        training,
        reduction,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut cfg = PipelineConfig::default();
        cfg.out_dims = 0;
        assert!(cfg.validate().is_err());
        cfg = PipelineConfig::default();
        cfg.out_dims = cfg.train.latent_dim + 1;
        assert!(cfg.validate().is_err());
        cfg = PipelineConfig::default();
        cfg.eps = 0.0;
        assert!(cfg.validate().is_err());
        cfg = PipelineConfig::default();
        cfg.density_threshold = 1.2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn pipeline_runs_end_to_end_on_a_small_graph() {
        // two 8-cliques with distinct attributes plus a few stragglers
        let n = 20;
        let ids = (0..n).map(|i| format!("n{i}")).collect();
        let names = (0..6).map(|j| format!("#h{j}")).collect();
        let mut edges = Vec::new();
        for block in 0..2 {
            let base = block * 8;
            for i in 0..8 {
                for j in 0..8 {
                    if i != j {
                        edges.push((base + i, base + j));
                    }
                }
            }
        }
        edges.push((16, 17));
        let mut attrs = Vec::new();
        for i in 0..8 {
            attrs.push((i, 0));
            attrs.push((i, 1));
        }
        for i in 8..16 {
            attrs.push((i, 2));
            attrs.push((i, 3));
        }
        attrs.push((18, 4));
        let g = BinaryAttributedGraph::from_parts(ids, names, &edges, &attrs).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.train.epochs = 120;
        cfg.train.batch_size = 8;
        cfg.train.learning_rate = 2e-3;
        cfg.train.latent_dim = 4;
        cfg.train.hidden_a = 8;
        cfg.train.hidden_x = 6;
        cfg.eps = 0.8;
        cfg.min_pts = 3;
        cfg.top_k = 5;
        let run: PipelineRun<f64> = run_pipeline(&g, &cfg).unwrap();
        assert_eq!(run.training.latent.node_count(), n);
        assert_eq!(run.reduction.projected.cols(), 2);
        assert_eq!(run.clusters.labels.len(), n);
    }
}
