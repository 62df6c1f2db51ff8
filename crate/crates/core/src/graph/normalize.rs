use std::sync::Arc;

use crate::autodiff::SparseMatrix;
use crate::error::Result;
use crate::graph::symmetric_csr;

/// `Â = D̃^{-1/2}(A + I)D̃^{-1/2}` in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: Arc<SparseMatrix>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Arc<SparseMatrix> {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.dim()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// GCN normalization of the undirected edge set (pairs in either or both
/// directions), with a self loop added on every node.
pub fn gcn_normalize(edges: &[(usize, usize)], num_nodes: usize) -> Result<NormalizedAdjacency> {
    let (offsets, neighbors) = symmetric_csr(num_nodes, edges)?;
    let deg: Vec<usize> = (0..num_nodes).map(|i| offsets[i + 1] - offsets[i] + 1).collect();

    let mut out_offsets = Vec::with_capacity(num_nodes + 1);
    let mut indices = Vec::with_capacity(neighbors.len() + num_nodes);
    let mut weights = Vec::with_capacity(neighbors.len() + num_nodes);
    out_offsets.push(0);
    for i in 0..num_nodes {
        let row = &neighbors[offsets[i]..offsets[i + 1]];
        let split = row.partition_point(|&j| j < i);
        let cols = row[..split].iter().chain(std::iter::once(&i)).chain(&row[split..]);
        for &j in cols {
            indices.push(j);
            weights.push(1.0 / ((deg[i] * deg[j]) as f64).sqrt());
        }
        out_offsets.push(indices.len());
    }
    Ok(NormalizedAdjacency {
        matrix: Arc::new(SparseMatrix::new(num_nodes, out_offsets, indices, weights)?),
    })
}
