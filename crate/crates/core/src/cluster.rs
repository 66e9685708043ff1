//! Dimensionality reduction of the latent matrix, density-based clustering,
//! and ranking of clusters by induced follower-network density.

use serde::{Deserialize, Serialize};

use crate::autoencoder::LatentMatrix;
use crate::error::{Error, Result};
use crate::graph::{BinaryAttributedGraph, NodeSubset};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Noise label used by [`dbscan`].
pub const NOISE: i64 = -1;

/// Output of a reduction: the projected points plus the projection basis.
#[derive(Debug, Clone)]
pub struct Reduction<S> {
    /// n×m projection of the mean-centered input.
    pub projected: DenseMatrix<S>,
    /// k×m matrix whose columns are the projection directions (orthonormal).
    pub components: DenseMatrix<S>,
    /// Descending eigenvalues of the sample covariance, one per component.
    pub eigenvalues: Vec<f64>,
    /// True when some requested component had (numerically) zero variance;
    /// such projection columns are zeroed.
    pub rank_deficient: bool,
}

/// Pluggable n×k → n×m reduction stage. The default is [`PcaReducer`]; any
/// other embedding (e.g. a UMAP binding) can be slotted in behind this trait.
pub trait Reducer<S: Scalar> {
    fn reduce(&self, points: &DenseMatrix<S>, out_dims: usize) -> Result<Reduction<S>>;
}

/// Deterministic principal-component projection: columns are mean-centered,
/// then projected onto the top eigenvectors of the sample covariance. Each
/// eigenvector is oriented so its largest-magnitude entry is positive.
#[derive(Debug, Clone, Copy, Default)]
pub struct PcaReducer;

impl<S: Scalar> Reducer<S> for PcaReducer {
    fn reduce(&self, points: &DenseMatrix<S>, out_dims: usize) -> Result<Reduction<S>> {
        let n = points.rows();
        let k = points.cols();
        if out_dims == 0 || out_dims > k {
            return Err(Error::InvalidParameter(format!(
                "out_dims must be in 1..={k}, got {out_dims}"
            )));
        }
        if !points.is_finite() {
            return Err(Error::NonFinite("reduction input".into()));
        }

        // Work in f64 regardless of S for a stable eigendecomposition.
        let p64 = points.to_f64();
        let means: Vec<f64> = p64.column_sums().iter().map(|s| s / n as f64).collect();
        let mut centered = DenseMatrix::<f64>::zeros(n, k);
        for i in 0..n {
            let src = p64.row(i);
            let dst = centered.row_mut(i);
            for ((d, &v), &m) in dst.iter_mut().zip(src.iter()).zip(means.iter()) {
                *d = v - m;
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut cov = vec![vec![0.0f64; k]; k];
        for i in 0..n {
            let row = centered.row(i);
            for a in 0..k {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..k {
                    cov[a][b] += ra * row[b];
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                cov[a][b] /= denom;
                cov[b][a] = cov[a][b];
            }
        }

        let (eigenvalues, eigenvectors) = jacobi_eigen(cov);
        // order descending by eigenvalue, stable on ties
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            eigenvalues[b]
                .partial_cmp(&eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let max_eig = eigenvalues[order[0]].max(0.0);
        let tol = max_eig * 1e-12;
        let mut components = DenseMatrix::<f64>::zeros(k, out_dims);
        let mut selected_eigenvalues = Vec::with_capacity(out_dims);
        let mut rank_deficient = false;
        for (m, &src) in order.iter().take(out_dims).enumerate() {
            let mut vector: Vec<f64> = (0..k).map(|i| eigenvectors[i][src]).collect();
            // sign convention: largest-magnitude entry positive
            let lead = vector
                .iter()
                .enumerate()
                .max_by(|(ai, a), (bi, b)| {
                    a.abs()
                        .partial_cmp(&b.abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(bi.cmp(ai))
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            if vector[lead] < 0.0 {
                for v in vector.iter_mut() {
                    *v = -*v;
                }
            }
            if eigenvalues[src] <= tol {
                rank_deficient = true;
            }
            for i in 0..k {
                components.set(i, m, vector[i]);
            }
            selected_eigenvalues.push(eigenvalues[src]);
        }

        let mut projected = centered.matmul(&components);
        // zero-pad components without variance
        for (m, &eig) in selected_eigenvalues.iter().enumerate() {
            if eig <= tol {
                for i in 0..n {
                    projected.set(i, m, 0.0);
                }
            }
        }

        Ok(Reduction {
            projected: convert_matrix(&projected),
            components: convert_matrix(&components),
            eigenvalues: selected_eigenvalues,
            rank_deficient,
        })
    }
}

fn convert_matrix<S: Scalar>(m: &DenseMatrix<f64>) -> DenseMatrix<S> {
    DenseMatrix::from_vec(
        m.rows(),
        m.cols(),
        m.data().iter().map(|&v| S::from_f64_lossy(v)).collect(),
    )
    .expect("shape preserved")
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors) where `eigenvectors[i][j]` is component i of
/// eigenvector j.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = a.len();
    let mut v = vec![vec![0.0; k]; k];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if k <= 1 {
        let eigenvalues = if k == 1 { vec![a[0][0]] } else { vec![] };
        return (eigenvalues, v);
    }
    let scale: f64 = a
        .iter()
        .enumerate()
        .map(|(i, row)| row[i].abs())
        .fold(0.0, f64::max)
        .max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..k {
            for q in (p + 1)..k {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..k {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for j in 0..k {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = c * apj - s * aqj;
                    a[q][j] = s * apj + c * aqj;
                }
                for i in 0..k {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..k).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// Convenience wrapper applying [`PcaReducer`] to a latent matrix.
pub fn reduce<S: Scalar>(latent: &LatentMatrix<S>, out_dims: usize) -> Result<Reduction<S>> {
    PcaReducer.reduce(&latent.h, out_dims)
}

/// DBSCAN with Euclidean eps-neighborhoods (a point's neighborhood includes
/// itself; membership is squared distance ≤ eps²).
///
/// Points are visited in ascending index order and clusters expanded
/// breadth-first, so border points attach to the first core cluster that
/// reaches them under that order; the output is reproducible bit-exactly for
/// a fixed input order. Unreachable points get label −1.
pub fn dbscan<S: Scalar>(points: &DenseMatrix<S>, eps: f64, min_pts: usize) -> Result<Vec<i64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidParameter("min_pts must be >= 1".into()));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("dbscan input".into()));
    }
    let n = points.rows();
    let eps_sq = S::from_f64_lossy(eps * eps);
    let neighbors_of = |p: usize| -> Vec<usize> {
        let row = points.row(p);
        (0..n)
            .filter(|&q| {
                let other = points.row(q);
                let mut acc = S::zero();
                for (&a, &b) in row.iter().zip(other.iter()) {
                    let diff = a - b;
                    acc += diff * diff;
                }
                acc <= eps_sq
            })
            .collect()
    };

    let mut labels = vec![NOISE; n];
    let mut visited = vec![false; n];
    let mut next_cluster: i64 = 0;

    for p in 0..n {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let neighborhood = neighbors_of(p);
        if neighborhood.len() < min_pts {
            continue; // stays noise unless a later cluster reaches it
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[p] = cluster;
        let mut queue: std::collections::VecDeque<usize> = neighborhood.into();
        while let Some(q) = queue.pop_front() {
            if labels[q] == NOISE {
                labels[q] = cluster;
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let q_neighbors = neighbors_of(q);
            if q_neighbors.len() >= min_pts {
                queue.extend(q_neighbors);
            }
        }
    }
    Ok(labels)
}

/// Cluster labels plus per-cluster induced densities and the top-k ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Per-node label: −1 noise, otherwise a cluster id in `0..cluster_count`.
    pub labels: Vec<i64>,
    pub cluster_sizes: Vec<usize>,
    /// Directed density of each cluster-induced subgraph; size-1 clusters
    /// carry density 0 so the ranking is total.
    pub induced_densities: Vec<f64>,
    /// Whether each cluster's density is ≥ the threshold.
    pub above_threshold: Vec<bool>,
    /// Cluster ids by descending density, ties broken by smaller id;
    /// at most `k` entries.
    pub top_k: Vec<usize>,
    pub threshold: f64,
    pub k: usize,
}

impl ClusterResult {
    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn members(&self, cluster_id: usize) -> NodeSubset {
        NodeSubset::new(
            self.labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == cluster_id as i64)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

/// Computes per-cluster induced densities and ranks the k densest clusters.
pub fn rank_clusters(
    graph: &BinaryAttributedGraph,
    labels: &[i64],
    k: usize,
    threshold: f64,
) -> Result<ClusterResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0,1], got {threshold}"
        )));
    }
    if labels.len() != graph.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a graph of {} nodes",
            labels.len(),
            graph.node_count()
        )));
    }
    let cluster_count = labels
        .iter()
        .filter(|&&l| l >= 0)
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0);
    for &l in labels {
        if l < NOISE {
            return Err(Error::InvalidParameter(format!("invalid label {l}")));
        }
    }

    let mut member_lists: Vec<Vec<usize>> = vec![Vec::new(); cluster_count];
    for (node, &l) in labels.iter().enumerate() {
        if l >= 0 {
            member_lists[l as usize].push(node);
        }
    }
    let mut cluster_sizes = Vec::with_capacity(cluster_count);
    let mut induced_densities = Vec::with_capacity(cluster_count);
    for members in &member_lists {
        cluster_sizes.push(members.len());
        if members.len() < 2 {
            induced_densities.push(0.0);
        } else {
            let subset = NodeSubset::new(members.clone());
            induced_densities.push(graph.induced_density(&subset)?);
        }
    }
    let above_threshold: Vec<bool> = induced_densities.iter().map(|&d| d >= threshold).collect();

    let mut ids: Vec<usize> = (0..cluster_count).collect();
    ids.sort_by(|&a, &b| {
        induced_densities[b]
            .partial_cmp(&induced_densities[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids.truncate(k);

    Ok(ClusterResult {
        labels: labels.to_vec(),
        cluster_sizes,
        induced_densities,
        above_threshold,
        top_k: ids,
        threshold,
        k,
    })
}
