//! Graph topology, features, sampling and smoothness.

mod io;
mod normalize;
mod sampling;
mod sbm;
mod smoothness;

pub use io::{load_graph, load_labels, parse_edges, parse_features, write_edges, write_features, write_labels};
pub use normalize::{gcn_normalize, NormalizedAdjacency};
pub use sampling::{
    node_split, sample_edge_mask, sample_negative_edges, split_edges_holdout, EdgeMaskSplit, LinkSplit,
    NegativeEdgeSet, NodeSplit,
};
pub use sbm::{generate_sbm, SbmConfig};
pub use smoothness::{neighbor_mean, smoothness_delta, NeighborMean};

use crate::autodiff::{Matrix, SparseMatrix};
use crate::error::{Error, Result};

/// Undirected node pair stored as `(min, max)`.
pub type Edge = (usize, usize);

/// Undirected simple graph with dense node features.
///
/// Adjacency is kept in CSR form with both directions of every edge present,
/// sorted neighbor lists, no self loops and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Matrix,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from pairs read as undirected edges. Self loops are
    /// dropped and duplicates (in either direction) collapse.
    pub fn new(edges: &[(usize, usize)], features: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        let num_nodes = features.rows();
        if let Some(l) = &labels {
            if l.len() != num_nodes {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {num_nodes} nodes",
                    l.len()
                )));
            }
        }
        let (offsets, neighbors) = symmetric_csr(num_nodes, edges)?;
        Ok(Self {
            num_nodes,
            offsets,
            neighbors,
            features,
            labels,
        })
    }

    /// Same nodes, features and labels over a different edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        let (offsets, neighbors) = symmetric_csr(self.num_nodes, edges)?;
        Ok(Self {
            num_nodes: self.num_nodes,
            offsets,
            neighbors,
            features: self.features.clone(),
            labels: self.labels.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Ordered-pair edge count (each undirected edge counted twice).
    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn undirected_edges(&self) -> Vec<Edge> {
        (0..self.num_nodes)
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Nodes with at least one neighbor.
    pub fn active_mask(&self) -> Vec<bool> {
        (0..self.num_nodes).map(|i| self.degree(i) > 0).collect()
    }

    /// Row-normalized adjacency `D⁻¹A`; rows of isolated nodes are empty.
    pub fn mean_operator(&self) -> SparseMatrix {
        let weights = (0..self.num_nodes)
            .flat_map(|i| {
                let d = self.degree(i);
                std::iter::repeat_n(1.0 / d as f64, d)
            })
            .collect();
        SparseMatrix::new(self.num_nodes, self.offsets.clone(), self.neighbors.clone(), weights)
            .expect("graph CSR is valid by construction")
    }
}

/// Symmetric, deduplicated, loop-free CSR for `edges` over `n` nodes.
pub(crate) fn symmetric_csr(n: usize, edges: &[(usize, usize)]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    num_nodes: n,
                });
            }
        }
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::new();
    offsets.push(0);
    for mut list in adj {
        list.sort_unstable();
        list.dedup();
        neighbors.extend(list);
        offsets.push(neighbors.len());
    }
    Ok((offsets, neighbors))
}
