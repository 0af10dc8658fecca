//! Sparse undirected graphs with an edge mask.
//!
//! A [`Graph`] stores a canonical edge list (each pair `(u, v)` with
//! `u < v`, sorted lexicographically, deduplicated), a dense feature matrix
//! with one row per node, optional class labels, and a binary edge mask.
//! A masked-off edge is invisible to every structural query: neighbor
//! lookups, components, bridges, and centrality all operate on the active
//! subgraph. Mask updates happen only between training rounds; everything
//! else treats the graph as immutable.

use ndarray::Array2;
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::rng::{self, SplitMix64};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EndpointOutOfRange(usize, usize, usize),
    #[error("self-loop ({0}, {0}) is not allowed")]
    SelfLoop(usize),
    #[error("feature row {row} has {got} entries, expected {expected}")]
    RaggedFeatures { row: usize, expected: usize, got: usize },
    #[error("feature matrix has {got} rows, expected {expected} (one per node)")]
    FeatureRowCount { expected: usize, got: usize },
    #[error("label vector has {got} entries, expected {expected}")]
    LabelCount { expected: usize, got: usize },
    #[error("edge mask has {got} bits, expected {expected}")]
    MaskLength { expected: usize, got: usize },
    #[error("node index {0} out of range 0..{1}")]
    NodeOutOfRange(usize, usize),
    #[error("edge index {0} out of range 0..{1}")]
    EdgeOutOfRange(usize, usize),
    #[error("invalid block probabilities: require 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")]
    InvalidProbability { p_in: f64, p_out: f64 },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A sorted set of node indices, used to carry pruning selections and
/// partition assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSubset {
    indices: Vec<usize>,
}

impl NodeSubset {
    /// Build from arbitrary indices; sorts and deduplicates, and checks
    /// every index against `num_nodes`.
    pub fn new(mut indices: Vec<usize>, num_nodes: usize) -> Result<Self, GraphError> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= num_nodes) {
            return Err(GraphError::NodeOutOfRange(bad, num_nodes));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.indices.binary_search(&node).is_ok()
    }

    /// All nodes of a `num_nodes` graph that are not in this subset.
    pub fn complement(&self, num_nodes: usize) -> Vec<usize> {
        (0..num_nodes).filter(|v| !self.contains(*v)).collect()
    }
}

/// Undirected simple graph with node features, optional labels, and a
/// binary edge mask (1 = active).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    edge_mask: Vec<bool>,
}

impl Graph {
    /// Canonicalize and validate an edge list into a graph with an all-ones
    /// mask. Edges may arrive in any order and orientation; duplicates
    /// collapse to one edge. `features` must have one row per node.
    pub fn build(
        num_nodes: usize,
        edge_pairs: &[(usize, usize)],
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        if features.nrows() != num_nodes {
            return Err(GraphError::FeatureRowCount {
                expected: num_nodes,
                got: features.nrows(),
            });
        }
        if let Some(ref l) = labels {
            if l.len() != num_nodes {
                return Err(GraphError::LabelCount { expected: num_nodes, got: l.len() });
            }
        }
        let mut edges = Vec::with_capacity(edge_pairs.len());
        for &(a, b) in edge_pairs {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if a >= num_nodes || b >= num_nodes {
                return Err(GraphError::EndpointOutOfRange(a, b, num_nodes));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        let edge_mask = vec![true; edges.len()];
        Ok(Self { num_nodes, edges, features, labels, edge_mask })
    }

    /// Build from feature rows given as slices; rejects ragged input.
    pub fn build_from_rows(
        num_nodes: usize,
        edge_pairs: &[(usize, usize)],
        feature_rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        let dim = feature_rows.first().map_or(0, Vec::len);
        for (row, r) in feature_rows.iter().enumerate() {
            if r.len() != dim {
                return Err(GraphError::RaggedFeatures { row, expected: dim, got: r.len() });
            }
        }
        let flat: Vec<f64> = feature_rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((feature_rows.len(), dim), flat)
            .expect("rectangularity checked above");
        Self::build(num_nodes, edge_pairs, features, labels)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// The canonical edge list, including masked-off edges.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_mask(&self) -> &[bool] {
        &self.edge_mask
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of classes implied by the labels (max label + 1).
    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Replace the feature matrix; shape must match.
    pub fn set_features(&mut self, features: Array2<f64>) -> Result<(), GraphError> {
        if features.nrows() != self.num_nodes {
            return Err(GraphError::FeatureRowCount {
                expected: self.num_nodes,
                got: features.nrows(),
            });
        }
        self.features = features;
        Ok(())
    }

    pub fn num_active_edges(&self) -> usize {
        self.edge_mask.iter().filter(|&&m| m).count()
    }

    /// Indices (into [`edges`](Self::edges)) of the active edges.
    pub fn active_edge_indices(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edge_mask[i]).collect()
    }

    pub fn is_edge_active(&self, edge_idx: usize) -> Result<bool, GraphError> {
        self.edge_mask
            .get(edge_idx)
            .copied()
            .ok_or(GraphError::EdgeOutOfRange(edge_idx, self.edges.len()))
    }

    /// Set one mask bit. Deactivating is how edges are pruned; the edge
    /// itself stays in the list so indices remain stable.
    pub fn set_edge_active(&mut self, edge_idx: usize, active: bool) -> Result<(), GraphError> {
        if edge_idx >= self.edges.len() {
            return Err(GraphError::EdgeOutOfRange(edge_idx, self.edges.len()));
        }
        self.edge_mask[edge_idx] = active;
        Ok(())
    }

    /// Neighbors of `v` over active edges, ascending.
    pub fn active_neighbors(&self, v: usize) -> Result<Vec<usize>, GraphError> {
        if v >= self.num_nodes {
            return Err(GraphError::NodeOutOfRange(v, self.num_nodes));
        }
        let mut out = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if !self.edge_mask[i] {
                continue;
            }
            if a == v {
                out.push(b);
            } else if b == v {
                out.push(a);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Adjacency lists over active edges; each list ascending. Built in one
    /// pass for callers that iterate neighborhoods repeatedly.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if self.edge_mask[i] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Connected components of the active subgraph, each sorted, ordered by
    /// smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.num_nodes];
        let mut comps = Vec::new();
        for start in 0..self.num_nodes {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn num_components(&self) -> usize {
        self.connected_components().len()
    }

    /// Edge indices of the bridges of the active subgraph: exactly the
    /// active edges whose removal would split a component.
    ///
    /// Iterative low-link DFS; parallel edges cannot occur (simple graph),
    /// so skipping the tree-parent once per child is sound.
    pub fn find_bridges(&self) -> Vec<usize> {
        // Adjacency carrying edge indices so the result can be reported as
        // indices into the canonical edge list.
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.num_nodes];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if self.edge_mask[i] {
                adj[a].push((b, i));
                adj[b].push((a, i));
            }
        }

        let mut visit = vec![usize::MAX; self.num_nodes];
        let mut low = vec![usize::MAX; self.num_nodes];
        let mut clock = 0usize;
        let mut bridges = Vec::new();

        for root in 0..self.num_nodes {
            if visit[root] != usize::MAX {
                continue;
            }
            // Stack frames: (node, incoming edge index, next child position).
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            visit[root] = clock;
            low[root] = clock;
            clock += 1;
            while let Some(&(v, in_edge, next)) = stack.last() {
                if next < adj[v].len() {
                    stack.last_mut().expect("nonempty").2 += 1;
                    let (u, e) = adj[v][next];
                    if e == in_edge {
                        continue;
                    }
                    if visit[u] == usize::MAX {
                        visit[u] = clock;
                        low[u] = clock;
                        clock += 1;
                        stack.push((u, e, 0));
                    } else {
                        low[v] = low[v].min(visit[u]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > visit[parent] {
                            bridges.push(in_edge);
                        }
                    }
                }
            }
        }
        bridges.sort_unstable();
        bridges
    }

    /// The induced subgraph on `keep` (ascending node indices). Nodes are
    /// re-indexed densely in the given order; surviving edges keep their
    /// mask bits; feature and label rows are filtered to match.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Graph, GraphError> {
        let mut remap = vec![usize::MAX; self.num_nodes];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.num_nodes {
                return Err(GraphError::NodeOutOfRange(old, self.num_nodes));
            }
            remap[old] = new;
        }
        let mut edges = Vec::new();
        let mut mask = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let (na, nb) = (remap[a], remap[b]);
            if na != usize::MAX && nb != usize::MAX {
                edges.push((na.min(nb), na.max(nb)));
                mask.push(self.edge_mask[i]);
            }
        }
        // keep is ascending, so remapping is monotone and the filtered edge
        // list is already canonical.
        let dim = self.feature_dim();
        let mut features = Array2::zeros((keep.len(), dim));
        for (new, &old) in keep.iter().enumerate() {
            features.row_mut(new).assign(&self.features.row(old));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&old| l[old]).collect());
        Ok(Graph { num_nodes: keep.len(), edges, features, labels, edge_mask: mask })
    }

    /// Serialize to the plain text edge-list format (active edges only),
    /// mainly for debugging and golden files.
    pub fn to_edge_list_string(&self) -> String {
        let mut s = String::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if self.edge_mask[i] {
                let _ = writeln!(s, "{a} {b}");
            }
        }
        s
    }
}

/// Stochastic-block-model generator.
///
/// Nodes are laid out block by block; each unordered pair `(u, v)` with
/// `u < v` (lexicographic order) draws one uniform from the seeded stream
/// and keeps the edge when it falls below `p_in` (same block) or `p_out`
/// (different blocks). Labels are block indices. Features are the block's
/// mean vector plus Gaussian jitter: block `b` has mean `e_{b mod dim}`
/// (scaled by [`SBM_FEATURE_SEPARATION`]) and per-coordinate jitter std
/// [`SBM_FEATURE_JITTER`], drawn row by row after all edges.
pub fn sbm_generate(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&p_out) || !(0.0..=1.0).contains(&p_in) || p_out > p_in {
        return Err(GraphError::InvalidProbability { p_in, p_out });
    }
    let num_nodes: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(num_nodes);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }

    let mut gen = SplitMix64::new(rng::derive_seed(seed, &[rng::stream::SBM]));
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in (u + 1)..num_nodes {
            let p = if block_of[u] == block_of[v] { p_in } else { p_out };
            if gen.next_f64() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Array2::zeros((num_nodes, feature_dim));
    for v in 0..num_nodes {
        for j in 0..feature_dim {
            let mean = if feature_dim > 0 && j == block_of[v] % feature_dim {
                SBM_FEATURE_SEPARATION
            } else {
                0.0
            };
            let (z, _) = gen.next_normal_pair();
            features[[v, j]] = mean + SBM_FEATURE_JITTER * z;
        }
    }

    Graph::build(num_nodes, &edges, features, Some(block_of))
}

/// Scale of the one-hot block mean in SBM features.
pub const SBM_FEATURE_SEPARATION: f64 = 1.0;
/// Per-coordinate Gaussian jitter std in SBM features.
pub const SBM_FEATURE_JITTER: f64 = 0.5;

/// Load a graph from a whitespace-separated edge-list file ("u v" per line,
/// `#` comments and blank lines allowed), with optional headerless CSV
/// features and labels (row i = node i).
///
/// With a feature file, the node count is the feature row count; otherwise
/// it is the largest endpoint + 1 and features are an `n × 0` matrix.
pub fn load_edge_list(
    path: &Path,
    feature_path: Option<&Path>,
    label_path: Option<&Path>,
) -> Result<Graph, GraphError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| GraphError::Io {
            path: p.display().to_string(),
            source,
        })
    };

    let text = read(path)?;
    let mut edges = Vec::new();
    let mut max_node = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize, GraphError> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| GraphError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("expected \"u v\", got {raw:?}"),
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(GraphError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("trailing tokens in {raw:?}"),
            });
        }
        max_node = Some(max_node.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        edges.push((u, v));
    }

    let features = match feature_path {
        Some(fp) => {
            let text = read(fp)?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() {
                    continue;
                }
                let row: Result<Vec<f64>, _> =
                    line.split(',').map(|t| t.trim().parse::<f64>()).collect();
                rows.push(row.map_err(|e| GraphError::Parse {
                    path: fp.display().to_string(),
                    line: lineno + 1,
                    msg: e.to_string(),
                })?);
            }
            Some(rows)
        }
        None => None,
    };

    let num_nodes = match &features {
        Some(rows) => rows.len(),
        None => max_node.map_or(0, |m| m + 1),
    };

    let labels = match label_path {
        Some(lp) => {
            let text = read(lp)?;
            let mut labels = Vec::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() {
                    continue;
                }
                labels.push(line.parse::<usize>().map_err(|e| GraphError::Parse {
                    path: lp.display().to_string(),
                    line: lineno + 1,
                    msg: e.to_string(),
                })?);
            }
            Some(labels)
        }
        None => None,
    };

    match features {
        Some(rows) => Graph::build_from_rows(num_nodes, &edges, &rows, labels),
        None => Graph::build(num_nodes, &edges, Array2::zeros((num_nodes, 0)), labels),
    }
}
