//! Per-cluster analyst artifacts: hashtag usage fingerprints, clustering-
//! coefficient fingerprints, and HITS-annotated cluster summaries.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterResult;
use crate::error::{Error, Result};
use crate::graph::{clustering_from_adjacency, hits_power_iteration, BinaryAttributedGraph, NodeSubset};
use crate::matrix::SparseBinaryMatrix;

/// Relative usage frequency of the globally most popular hashtags within one
/// cluster. `relative_frequency[j]` is the share of cluster members using
/// `hashtag_names[j]` (distinct users, not occurrences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagFingerprint {
    pub cluster_id: i64,
    pub hashtag_names: Vec<String>,
    pub relative_frequency: Vec<f64>,
}

/// Normalized histogram of node clustering coefficients computed on the
/// cluster-induced undirected subgraph. `density` integrates to 1 over the
/// `bin_edges` partition of [0,1]; `raw_coefficients` lets a renderer apply
/// its own smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringFingerprint {
    pub cluster_id: i64,
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub raw_coefficients: Vec<f64>,
}

/// Authority score for one node of a cluster-induced subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorityEntry {
    pub node_id: String,
    pub score: f64,
}

/// Everything the report carries for one top-k cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReportEntry {
    pub id: i64,
    pub size: usize,
    pub density: f64,
    pub hashtag_fingerprint: HashtagFingerprint,
    pub clustering_fingerprint: Option<ClusteringFingerprint>,
    pub authority: Vec<AuthorityEntry>,
    /// Edge list of the cluster-induced subgraph, as node-id pairs.
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub node_count: usize,
    pub attribute_count: usize,
    pub threshold: f64,
    pub top_k: usize,
    pub popular_hashtags: usize,
    pub histogram_bins: usize,
}

/// One report document per run: metadata plus a section per ranked cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub run_metadata: ReportMetadata,
    pub clusters: Vec<ClusterReportEntry>,
}

/// Top-m hashtag columns by global distinct-user count, ties broken by
/// column index.
pub fn popular_hashtags(graph: &BinaryAttributedGraph, m: usize) -> Vec<usize> {
    let counts = graph.attributes().column_counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(m);
    order
}

/// Fraction of cluster members using each of the globally most popular
/// hashtags.
pub fn hashtag_fingerprint(
    graph: &BinaryAttributedGraph,
    cluster: &NodeSubset,
    cluster_id: i64,
    m: usize,
) -> Result<HashtagFingerprint> {
    if cluster.is_empty() {
        return Err(Error::InvalidParameter(
            "hashtag fingerprint needs a non-empty cluster".into(),
        ));
    }
    if m > graph.attribute_count() {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds attribute count {}",
            graph.attribute_count()
        )));
    }
    let popular = popular_hashtags(graph, m);
    let size = cluster.len() as f64;
    let relative_frequency: Vec<f64> = popular
        .iter()
        .map(|&j| {
            let users = cluster
                .iter()
                .filter(|&i| graph.attributes().contains(i, j))
                .count();
            users as f64 / size
        })
        .collect();
    Ok(HashtagFingerprint {
        cluster_id,
        hashtag_names: popular
            .iter()
            .map(|&j| graph.attribute_names()[j].clone())
            .collect(),
        relative_frequency,
    })
}

/// Undirected adjacency of the subgraph induced by `cluster`, re-indexed to
/// local positions.
fn induced_undirected(graph: &BinaryAttributedGraph, cluster: &NodeSubset) -> Vec<Vec<u32>> {
    let members: Vec<usize> = cluster.iter().collect();
    let mut local = vec![Vec::new(); members.len()];
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate().skip(a + 1) {
            if graph.has_edge(i, j) || graph.has_edge(j, i) {
                local[a].push(b as u32);
                local[b].push(a as u32);
            }
        }
    }
    for list in &mut local {
        list.sort_unstable();
    }
    local
}

/// Histogram of clustering coefficients on the cluster-induced undirected
/// subgraph, normalized to a probability density over [0,1].
pub fn clustering_fingerprint(
    graph: &BinaryAttributedGraph,
    cluster: &NodeSubset,
    cluster_id: i64,
    bins: usize,
) -> Result<ClusteringFingerprint> {
    if cluster.len() < 2 {
        return Err(Error::InvalidParameter(
            "clustering fingerprint needs a cluster of at least 2 nodes".into(),
        ));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be >= 1".into()));
    }
    let local = induced_undirected(graph, cluster);
    let coefficients = clustering_from_adjacency(&local);

    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &c in &coefficients {
        let mut bin = (c * bins as f64).floor() as usize;
        if bin >= bins {
            bin = bins - 1; // c = 1.0 lands in the last bin
        }
        counts[bin] += 1;
    }
    let total = coefficients.len() as f64;
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    let bin_edges: Vec<f64> = (0..=bins).map(|b| b as f64 * width).collect();
    Ok(ClusteringFingerprint {
        cluster_id,
        bin_edges,
        density,
        raw_coefficients: coefficients,
    })
}

const REPORT_HITS_ITERS: usize = 200;
const REPORT_HITS_TOL: f64 = 1e-9;

/// Builds the full analyst report for every cluster in the ranking's top-k:
/// size, induced density, both fingerprints, per-node HITS authority on the
/// cluster-induced subgraph, and that subgraph's edge list.
pub fn cluster_report(
    graph: &BinaryAttributedGraph,
    result: &ClusterResult,
    m: usize,
    bins: usize,
) -> Result<ClusterReport> {
    let mut clusters = Vec::with_capacity(result.top_k.len());
    for &cluster_id in &result.top_k {
        let members = result.members(cluster_id);
        let member_list: Vec<usize> = members.iter().collect();
        let id = cluster_id as i64;

        let hashtag = hashtag_fingerprint(graph, &members, id, m.min(graph.attribute_count()))?;
        let clustering = if members.len() >= 2 {
            Some(clustering_fingerprint(graph, &members, id, bins)?)
        } else {
            None
        };

        // induced subgraph, local indexing
        let mut induced = SparseBinaryMatrix::new(member_list.len(), member_list.len());
        let mut edges = Vec::new();
        for (a, &i) in member_list.iter().enumerate() {
            for (b, &j) in member_list.iter().enumerate() {
                if i != j && graph.has_edge(i, j) {
                    induced.insert(a, b);
                    edges.push((graph.node_id(i).to_string(), graph.node_id(j).to_string()));
                }
            }
        }
        // zero-edge induced subgraphs get all-zero authority scores
        let authority_scores = if induced.nnz() > 0 {
            hits_power_iteration(&induced, REPORT_HITS_ITERS, REPORT_HITS_TOL)?.authority
        } else {
            vec![0.0; member_list.len()]
        };
        let authority = member_list
            .iter()
            .zip(authority_scores)
            .map(|(&i, score)| AuthorityEntry {
                node_id: graph.node_id(i).to_string(),
                score,
            })
            .collect();

        clusters.push(ClusterReportEntry {
            id,
            size: members.len(),
            density: result.induced_densities[cluster_id],
            hashtag_fingerprint: hashtag,
            clustering_fingerprint: clustering,
            authority,
            edges,
        });
    }
    Ok(ClusterReport {
        run_metadata: ReportMetadata {
            node_count: graph.node_count(),
            attribute_count: graph.attribute_count(),
            threshold: result.threshold,
            top_k: result.k,
            popular_hashtags: m,
            histogram_bins: bins,
        },
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::rank_clusters;

    fn graph(
        n: usize,
        d: usize,
        edges: &[(usize, usize)],
        attrs: &[(usize, usize)],
    ) -> BinaryAttributedGraph {
        let ids = (0..n).map(|i| format!("n{i}")).collect();
        let names = (0..d).map(|j| format!("#h{j}")).collect();
        BinaryAttributedGraph::from_parts(ids, names, edges, attrs).unwrap()
    }

    #[test]
    fn hashtag_fingerprint_counts_distinct_users() {
        // 4 members; hashtag 0 used by all, 1 by none (in cluster), 2 by half
        let attrs = vec![
            (0, 0),
            (1, 0),
            (2, 0),
            (3, 0),
            (4, 1),
            (0, 2),
            (1, 2),
            (4, 2),
        ];
        let g = graph(5, 3, &[(0, 1)], &attrs);
        let cluster = NodeSubset::new(vec![0, 1, 2, 3]);
        let fp = hashtag_fingerprint(&g, &cluster, 0, 3).unwrap();
        // popularity: #h0 (4 users) > #h2 (3) > #h1 (1)
        assert_eq!(fp.hashtag_names, vec!["#h0", "#h2", "#h1"]);
        assert_eq!(fp.relative_frequency, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn hashtag_fingerprint_rejects_empty_cluster_and_big_m() {
        let g = graph(2, 1, &[(0, 1)], &[(0, 0)]);
        assert!(hashtag_fingerprint(&g, &NodeSubset::new(vec![]), 0, 1).is_err());
        assert!(hashtag_fingerprint(&g, &NodeSubset::new(vec![0]), 0, 2).is_err());
    }

    #[test]
    fn all_users_fingerprint_is_non_increasing() {
        let attrs = vec![
            (0, 2),
            (1, 2),
            (2, 2),
            (0, 0),
            (1, 0),
            (2, 1),
        ];
        let g = graph(4, 3, &[(0, 1)], &attrs);
        let everyone = NodeSubset::new((0..4).collect());
        let fp = hashtag_fingerprint(&g, &everyone, -1, 3).unwrap();
        for w in fp.relative_frequency.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn clustering_fingerprint_triangle_mass_in_top_bin() {
        let g = graph(3, 1, &[(0, 1), (1, 2), (2, 0)], &[(0, 0)]);
        let cluster = NodeSubset::new(vec![0, 1, 2]);
        let fp = clustering_fingerprint(&g, &cluster, 0, 10).unwrap();
        // all mass in the bin containing 1.0
        assert!((fp.density[9] - 10.0).abs() < 1e-9);
        assert!(fp.density[..9].iter().all(|&d| d == 0.0));
        assert_eq!(fp.raw_coefficients, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn clustering_fingerprint_star_mass_in_bottom_bin() {
        let g = graph(5, 1, &[(0, 1), (0, 2), (0, 3), (0, 4)], &[(0, 0)]);
        let cluster = NodeSubset::new(vec![0, 1, 2, 3, 4]);
        let fp = clustering_fingerprint(&g, &cluster, 0, 10).unwrap();
        assert!((fp.density[0] - 10.0).abs() < 1e-9);
        assert!(fp.density[1..].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn clustering_fingerprint_uses_induced_subgraph_only() {
        // nodes 0,1,2 form a path inside the cluster; node 3 closes a
        // triangle with 0 and 1 but sits outside the cluster.
        let edges = vec![(0, 1), (1, 2), (3, 0), (3, 1)];
        let g = graph(4, 1, &edges, &[(0, 0)]);
        let cluster = NodeSubset::new(vec![0, 1, 2]);
        let fp = clustering_fingerprint(&g, &cluster, 0, 4).unwrap();
        assert_eq!(fp.raw_coefficients, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn clustering_fingerprint_integrates_to_one() {
        let edges = vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 0), (1, 4)];
        let g = graph(6, 1, &edges, &[(0, 0)]);
        let cluster = NodeSubset::new(vec![0, 1, 2, 3, 4]);
        for bins in [1, 7, 20] {
            let fp = clustering_fingerprint(&g, &cluster, 0, bins).unwrap();
            let width = 1.0 / bins as f64;
            let integral: f64 = fp.density.iter().map(|d| d * width).sum();
            assert!((integral - 1.0).abs() < 1e-12, "bins={bins}");
        }
    }

    // independent oracle: dense-matrix coefficient computation + histogram
    fn fingerprint_oracle(
        g: &BinaryAttributedGraph,
        cluster: &[usize],
        bins: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let m = cluster.len();
        let mut und = vec![vec![false; m]; m];
        for a in 0..m {
            for b in 0..m {
                if a != b && (g.has_edge(cluster[a], cluster[b]) || g.has_edge(cluster[b], cluster[a]))
                {
                    und[a][b] = true;
                }
            }
        }
        let coeffs: Vec<f64> = (0..m)
            .map(|v| {
                let neighbors: Vec<usize> = (0..m).filter(|&u| und[v][u]).collect();
                if neighbors.len() < 2 {
                    return 0.0;
                }
                let mut tri = 0;
                for i in 0..neighbors.len() {
                    for j in (i + 1)..neighbors.len() {
                        if und[neighbors[i]][neighbors[j]] {
                            tri += 1;
                        }
                    }
                }
                2.0 * tri as f64 / (neighbors.len() * (neighbors.len() - 1)) as f64
            })
            .collect();
        let mut counts = vec![0usize; bins];
        for &c in &coeffs {
            let bin = ((c * bins as f64).floor() as usize).min(bins - 1);
            counts[bin] += 1;
        }
        let width = 1.0 / bins as f64;
        let density = counts
            .iter()
            .map(|&c| c as f64 / (coeffs.len() as f64 * width))
            .collect();
        (coeffs, density)
    }

    #[test]
    fn clustering_fingerprint_matches_oracle_on_random_clusters() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for trial in 0..50 {
            let n = 30;
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.12 {
                        edges.push((i, j));
                    }
                }
            }
            let g = graph(n, 1, &edges, &[(0, 0)]);
            let size = 2 + rng.random_range(0..28);
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
            }
            let cluster: Vec<usize> = pool[..size].to_vec();
            let subset = NodeSubset::new(cluster.clone());
            let sorted: Vec<usize> = subset.iter().collect();
            let fp = clustering_fingerprint(&g, &subset, 0, 8).unwrap();
            let (coeffs, density) = fingerprint_oracle(&g, &sorted, 8);
            assert_eq!(fp.raw_coefficients, coeffs, "trial {trial}");
            assert_eq!(fp.density, density, "trial {trial}");
        }
    }

    #[test]
    fn fingerprints_invariant_under_relabeling() {
        let edges = vec![(0, 1), (1, 2), (2, 0), (3, 0)];
        let attrs = vec![(0, 0), (1, 0), (2, 1), (3, 1)];
        let g = graph(4, 2, &edges, &attrs);
        // relabel nodes by permutation (0→2, 1→0, 2→3, 3→1)
        let perm = [2usize, 0, 3, 1];
        let permuted_edges: Vec<(usize, usize)> =
            edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let permuted_attrs: Vec<(usize, usize)> =
            attrs.iter().map(|&(i, j)| (perm[i], j)).collect();
        let ids = vec!["n1".into(), "n3".into(), "n0".into(), "n2".into()];
        let names = vec!["#h0".into(), "#h1".into()];
        let g2 =
            BinaryAttributedGraph::from_parts(ids, names, &permuted_edges, &permuted_attrs).unwrap();

        let cluster = NodeSubset::new(vec![0, 1, 2]);
        let cluster2 = NodeSubset::new(vec![perm[0], perm[1], perm[2]]);
        let fp1 = hashtag_fingerprint(&g, &cluster, 0, 2).unwrap();
        let fp2 = hashtag_fingerprint(&g2, &cluster2, 0, 2).unwrap();
        assert_eq!(fp1.relative_frequency, fp2.relative_frequency);
        assert_eq!(fp1.hashtag_names, fp2.hashtag_names);

        let cf1 = clustering_fingerprint(&g, &cluster, 0, 5).unwrap();
        let cf2 = clustering_fingerprint(&g2, &cluster2, 0, 5).unwrap();
        let sorted = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        assert_eq!(
            sorted(cf1.raw_coefficients.clone()),
            sorted(cf2.raw_coefficients.clone())
        );
        assert_eq!(cf1.density, cf2.density);
    }

    #[test]
    fn report_for_planted_clique() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
        edges.push((4, 5));
        let attrs = vec![(0, 0), (1, 0), (2, 0), (3, 0), (4, 1)];
        let g = graph(6, 2, &edges, &attrs);
        let labels = vec![0, 0, 0, 0, -1, -1];
        let ranking = rank_clusters(&g, &labels, 3, 0.5).unwrap();
        let report = cluster_report(&g, &ranking, 2, 4).unwrap();
        assert_eq!(report.clusters.len(), 1);
        let entry = &report.clusters[0];
        assert_eq!(entry.density, 1.0);
        assert_eq!(entry.size, 4);
        assert_eq!(entry.edges.len(), 12);
        let first = entry.authority[0].score;
        assert!(entry.authority.iter().all(|a| (a.score - first).abs() < 1e-9));

        // round-trips through serde unchanged
        let json = serde_json::to_string(&report).unwrap();
        let back: ClusterReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn report_with_empty_top_k_keeps_metadata() {
        let g = graph(3, 1, &[(0, 1)], &[(0, 0)]);
        let ranking = rank_clusters(&g, &[-1, -1, -1], 4, 0.25).unwrap();
        let report = cluster_report(&g, &ranking, 1, 5).unwrap();
        assert!(report.clusters.is_empty());
        assert_eq!(report.run_metadata.node_count, 3);
        assert_eq!(report.run_metadata.threshold, 0.25);
        assert_eq!(report.run_metadata.top_k, 4);
    }
}
