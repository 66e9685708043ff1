//! Adjacency-only greedy baseline: average-degree peeling on the undirected
//! projection. Repeatedly removing the minimum-degree node and keeping the
//! best prefix yields a 2-approximation of the densest subgraph, which is the
//! comparison point for the embedding pipeline on synthetic benchmarks.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::{BinaryAttributedGraph, NodeSubset};

/// Result of [`greedy_densest`]: the best prefix of the peeling order and the
/// objective trace. `score_history[0]` is f(V) for the full node set;
/// `score_history[r]` is the objective after `r` removals.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub selected: NodeSubset,
    pub score_history: Vec<f64>,
    pub best_score: f64,
}

/// Maximizes f(S) = undirected_edges(S) / |S| by min-degree peeling.
/// Ties break toward the smallest node index, so output is deterministic.
pub fn greedy_densest(graph: &BinaryAttributedGraph) -> Result<GreedyResult> {
    let n = graph.node_count();
    let adjacency = graph.undirected_adjacency();
    let mut edges_remaining: usize = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
    if edges_remaining == 0 {
        return Err(Error::DegenerateInput(
            "greedy peeling requires a graph with at least one edge".into(),
        ));
    }

    let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut removed = vec![false; n];
    // min-heap on (degree, index); stale entries skipped lazily
    let mut heap: BinaryHeap<std::cmp::Reverse<(usize, usize)>> = (0..n)
        .map(|v| std::cmp::Reverse((degree[v], v)))
        .collect();

    let mut score_history = Vec::with_capacity(n);
    score_history.push(edges_remaining as f64 / n as f64);
    let mut best_score = score_history[0];
    let mut best_removals = 0usize;
    let mut removal_order = Vec::with_capacity(n);

    for remaining in (2..=n).rev() {
        // pop the live minimum
        let victim = loop {
            let std::cmp::Reverse((deg, v)) = heap.pop().expect("heap tracks live nodes");
            if !removed[v] && degree[v] == deg {
                break v;
            }
        };
        removed[victim] = true;
        removal_order.push(victim);
        edges_remaining -= degree[victim];
        for &u in &adjacency[victim] {
            let u = u as usize;
            if !removed[u] {
                degree[u] -= 1;
                heap.push(std::cmp::Reverse((degree[u], u)));
            }
        }
        let score = edges_remaining as f64 / (remaining - 1) as f64;
        score_history.push(score);
        if score > best_score {
            best_score = score;
            best_removals = removal_order.len();
        }
    }

    let survivors: Vec<usize> = {
        let cut: std::collections::HashSet<usize> =
            removal_order[..best_removals].iter().copied().collect();
        (0..n).filter(|v| !cut.contains(v)).collect()
    };
    Ok(GreedyResult {
        selected: NodeSubset::new(survivors),
        score_history,
        best_score,
    })
}

/// Binary anomaly prediction flagging exactly the selected nodes.
pub fn baseline_predict(graph: &BinaryAttributedGraph, result: &GreedyResult) -> Vec<u8> {
    let mut prediction = vec![0u8; graph.node_count()];
    for v in result.selected.iter() {
        prediction[v] = 1;
    }
    prediction
}
