//! Binary attributed graph: directed follower adjacency plus binary
//! node-attribute (hashtag usage) matrix, with the pure topology metrics the
//! rest of the pipeline consumes.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sorted_intersection_len, SparseBinaryMatrix};

/// Directed graph over opaque node ids with a binary attribute matrix.
///
/// Invariants: no self-loops, no duplicate node ids, all entries binary.
/// Immutable after construction; metric functions are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAttributedGraph {
    node_ids: Vec<String>,
    attribute_names: Vec<String>,
    adjacency: SparseBinaryMatrix,
    attributes: SparseBinaryMatrix,
    node_index: HashMap<String, usize>,
}

/// Strictly increasing set of node (or attribute-column) indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSubset(Vec<usize>);

impl NodeSubset {
    /// Builds a subset from arbitrary indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        NodeSubset(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }
}

/// Outcome of [`load_graph`]: the graph plus ingestion statistics.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: BinaryAttributedGraph,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

/// HITS hub/authority fixed-point scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsScores {
    pub authority: Vec<f64>,
    pub hub: Vec<f64>,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    node_ids: Vec<String>,
    attribute_names: Vec<String>,
    edges: Vec<(usize, usize)>,
    attributes: Vec<(usize, usize)>,
}

impl BinaryAttributedGraph {
    /// Assembles a graph from parts. Self-loops are rejected; duplicate edges
    /// and attribute pairs collapse to a single 1-entry.
    pub fn from_parts(
        node_ids: Vec<String>,
        attribute_names: Vec<String>,
        edges: &[(usize, usize)],
        attribute_pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let n = node_ids.len();
        let d = attribute_names.len();
        let mut node_index = HashMap::with_capacity(n);
        for (i, id) in node_ids.iter().enumerate() {
            if node_index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate node id {id:?}")));
            }
        }
        let mut adjacency = SparseBinaryMatrix::new(n, n);
        for &(src, dst) in edges {
            if src >= n || dst >= n {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({src},{dst}) outside graph of {n} nodes"
                )));
            }
            if src == dst {
                return Err(Error::InvalidParameter(format!("self-loop on node {src}")));
            }
            adjacency.insert(src, dst);
        }
        let attributes = SparseBinaryMatrix::from_pairs(n, d, attribute_pairs)?;
        Ok(BinaryAttributedGraph {
            node_ids,
            attribute_names,
            adjacency,
            attributes,
            node_index,
        })
    }

    /// Assembles a graph from already-built sparse matrices (used by the
    /// injection harness). Validates shapes and the no-self-loop invariant.
    pub(crate) fn from_matrices(
        node_ids: Vec<String>,
        attribute_names: Vec<String>,
        adjacency: SparseBinaryMatrix,
        attributes: SparseBinaryMatrix,
    ) -> Result<Self> {
        let n = node_ids.len();
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency is {}x{} for {} nodes",
                adjacency.nrows(),
                adjacency.ncols(),
                n
            )));
        }
        if attributes.nrows() != n || attributes.ncols() != attribute_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "attribute matrix is {}x{} for {} nodes and {} attributes",
                attributes.nrows(),
                attributes.ncols(),
                n,
                attribute_names.len()
            )));
        }
        for i in 0..n {
            if adjacency.contains(i, i) {
                return Err(Error::InvalidParameter(format!("self-loop on node {i}")));
            }
        }
        let node_index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(BinaryAttributedGraph {
            node_ids,
            attribute_names,
            adjacency,
            attributes,
            node_index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.node_ids[index]
    }

    pub fn index_of(&self, node_id: &str) -> Option<usize> {
        self.node_index.get(node_id).copied()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn adjacency(&self) -> &SparseBinaryMatrix {
        &self.adjacency
    }

    pub fn attributes(&self) -> &SparseBinaryMatrix {
        &self.attributes
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.adjacency.contains(src, dst)
    }

    /// Neighbor lists of the undirected projection: edge {i,j} exists iff
    /// A[i][j]=1 or A[j][i]=1. Lists are sorted.
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        let n = self.node_count();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, j) in self.adjacency.iter_entries() {
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Directed edge density of the subgraph induced by `s`:
    /// internal edges / (|s|·(|s|−1)).
    pub fn induced_density(&self, s: &NodeSubset) -> Result<f64> {
        if s.len() < 2 {
            return Err(Error::UndefinedDensity { size: s.len() });
        }
        let edges = self.internal_edge_count(s);
        let pairs = (s.len() * (s.len() - 1)) as f64;
        Ok(edges as f64 / pairs)
    }

    /// Number of directed edges with both endpoints in `s`.
    pub fn internal_edge_count(&self, s: &NodeSubset) -> usize {
        let members: Vec<u32> = s.iter().map(|i| i as u32).collect();
        s.iter()
            .map(|i| sorted_intersection_len(self.adjacency.row(i), &members))
            .sum()
    }

    /// Density of the bipartite block X[s_v, s_x]: 1-entries / (|s_v|·|s_x|).
    pub fn bipartite_density(&self, s_v: &NodeSubset, s_x: &NodeSubset) -> Result<f64> {
        if s_v.is_empty() || s_x.is_empty() {
            return Err(Error::UndefinedDensity {
                size: s_v.len().min(s_x.len()),
            });
        }
        let cols: Vec<u32> = s_x.iter().map(|j| j as u32).collect();
        let ones: usize = s_v
            .iter()
            .map(|i| sorted_intersection_len(self.attributes.row(i), &cols))
            .sum();
        Ok(ones as f64 / (s_v.len() * s_x.len()) as f64)
    }

    /// Local clustering coefficient per node on the undirected projection.
    /// Nodes of degree < 2 get 0.
    pub fn clustering_coefficients(&self) -> Vec<f64> {
        let adj = self.undirected_adjacency();
        clustering_from_adjacency(&adj)
    }

    /// HITS hub/authority scores on the directed graph via power iteration.
    /// Both vectors are L2-normalized every iteration; stops when the max
    /// absolute change of either vector drops below `tol`.
    pub fn hits_scores(&self, max_iters: usize, tol: f64) -> Result<HitsScores> {
        if max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        if self.edge_count() == 0 {
            return Err(Error::DegenerateInput(
                "HITS requires a graph with at least one edge".into(),
            ));
        }
        hits_power_iteration(&self.adjacency, max_iters, tol)
    }

    /// Serializes the graph to the canonical JSON snapshot document.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let snapshot = Snapshot {
            node_ids: self.node_ids.clone(),
            attribute_names: self.attribute_names.clone(),
            edges: self.adjacency.iter_entries().collect(),
            attributes: self.attributes.iter_entries().collect(),
        };
        let json = serde_json::to_string(&snapshot)?;
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(json.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snapshot: Snapshot = serde_json::from_str(&raw)?;
        BinaryAttributedGraph::from_parts(
            snapshot.node_ids,
            snapshot.attribute_names,
            &snapshot.edges,
            &snapshot.attributes,
        )
    }
}

/// Power iteration over an explicit adjacency; also used for cluster-induced
/// subgraphs in reports.
pub(crate) fn hits_power_iteration(
    adjacency: &SparseBinaryMatrix,
    max_iters: usize,
    tol: f64,
) -> Result<HitsScores> {
    let n = adjacency.nrows();
    let norm_init = 1.0 / (n as f64).sqrt();
    let mut hub = vec![norm_init; n];
    let mut authority = vec![norm_init; n];
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        // authority ← normalize(Aᵀ · hub)
        let mut new_auth = vec![0.0; n];
        for i in 0..n {
            let h = hub[i];
            for &j in adjacency.row(i) {
                new_auth[j as usize] += h;
            }
        }
        normalize_l2(&mut new_auth)?;
        // hub ← normalize(A · authority)
        let mut new_hub = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for &j in adjacency.row(i) {
                acc += new_auth[j as usize];
            }
            new_hub[i] = acc;
        }
        normalize_l2(&mut new_hub)?;

        let delta = max_abs_diff(&authority, &new_auth).max(max_abs_diff(&hub, &new_hub));
        authority = new_auth;
        hub = new_hub;
        if delta < tol {
            break;
        }
    }

    Ok(HitsScores {
        authority,
        hub,
        iterations,
    })
}

fn normalize_l2(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "zero vector during HITS normalization".into(),
        ));
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Coefficients from undirected sorted neighbor lists: 2·(edges among
/// neighbors) / (deg·(deg−1)), or 0 for degree < 2.
pub(crate) fn clustering_from_adjacency(adj: &[Vec<u32>]) -> Vec<f64> {
    adj.iter()
        .map(|neighbors| {
            let deg = neighbors.len();
            if deg < 2 {
                return 0.0;
            }
            // Each edge among neighbors counted once: for u in N, count
            // members of adj[u] ∩ N greater than u.
            let mut links = 0usize;
            for &u in neighbors {
                for &w in &adj[u as usize] {
                    if w > u && neighbors.binary_search(&w).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (deg * (deg - 1)) as f64
        })
        .collect()
}

/// Loads a graph from TSV edge and attribute files.
///
/// Edge file: `src<TAB>dst` per line. Attribute file: `node_id<TAB>name`.
/// Lines starting with `#` and blank lines are skipped. Every id seen in
/// either file becomes a node, in order of first appearance (edge file
/// scanned first); attribute columns are ordered by first appearance.
/// Duplicate edges collapse; self-loops are dropped and counted.
pub fn load_graph(edge_file: &Path, attribute_file: &Path) -> Result<LoadedGraph> {
    let edge_text = fs::read_to_string(edge_file).map_err(|e| Error::io(edge_file, e))?;
    let attr_text = fs::read_to_string(attribute_file).map_err(|e| Error::io(attribute_file, e))?;

    let mut node_ids: Vec<String> = Vec::new();
    let mut node_index: HashMap<String, usize> = HashMap::new();
    let mut intern_node = |id: &str, node_ids: &mut Vec<String>| -> usize {
        if let Some(&i) = node_index.get(id) {
            return i;
        }
        let i = node_ids.len();
        node_ids.push(id.to_string());
        node_index.insert(id.to_string(), i);
        i
    };

    let mut raw_edges: Vec<(usize, usize)> = Vec::new();
    let mut self_loops = 0usize;
    for (lineno, line) in edge_text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (src, dst) = split_tsv_pair(line, edge_file, lineno + 1)?;
        let s = intern_node(src, &mut node_ids);
        let t = intern_node(dst, &mut node_ids);
        if s == t {
            self_loops += 1;
            continue;
        }
        raw_edges.push((s, t));
    }
    if raw_edges.is_empty() && self_loops == 0 {
        return Err(Error::EmptyInput {
            path: edge_file.to_path_buf(),
            reason: "no edge records found".into(),
        });
    }

    let mut attr_names: Vec<String> = Vec::new();
    let mut attr_index: HashMap<String, usize> = HashMap::new();
    let mut raw_attrs: Vec<(usize, usize)> = Vec::new();
    let mut any_attr_record = false;
    for (lineno, line) in attr_text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        any_attr_record = true;
        let (node, attr) = split_tsv_pair(line, attribute_file, lineno + 1)?;
        let i = intern_node(node, &mut node_ids);
        let j = match attr_index.get(attr) {
            Some(&j) => j,
            None => {
                let j = attr_names.len();
                attr_names.push(attr.to_string());
                attr_index.insert(attr.to_string(), j);
                j
            }
        };
        raw_attrs.push((i, j));
    }
    if !any_attr_record {
        return Err(Error::EmptyInput {
            path: attribute_file.to_path_buf(),
            reason: "no attribute records found".into(),
        });
    }

    let n = node_ids.len();
    let mut adjacency = SparseBinaryMatrix::new(n, n);
    let mut duplicate_edges = 0usize;
    for &(s, t) in &raw_edges {
        if !adjacency.insert(s, t) {
            duplicate_edges += 1;
        }
    }
    let mut attributes = SparseBinaryMatrix::new(n, attr_names.len());
    for &(i, j) in &raw_attrs {
        attributes.insert(i, j);
    }

    let graph = BinaryAttributedGraph {
        node_index: node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect(),
        node_ids,
        attribute_names: attr_names,
        adjacency,
        attributes,
    };
    Ok(LoadedGraph {
        graph,
        self_loops_dropped: self_loops,
        duplicate_edges,
    })
}

fn split_tsv_pair<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<(&'a str, &'a str)> {
    let mut fields = line.split('\t');
    let a = fields.next().unwrap_or("");
    let b = fields.next().unwrap_or("");
    if a.is_empty() || b.is_empty() || fields.next().is_some() {
        return Err(Error::MalformedLine {
            path: path.to_path_buf(),
            line: lineno,
            reason: format!("expected two tab-separated fields, got {line:?}"),
        });
    }
    Ok((a, b))
}
