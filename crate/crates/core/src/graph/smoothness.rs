use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Per-node mean of neighbor embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMean {
    pub means: Matrix,
    /// `false` for isolated nodes, whose `means` row is zero.
    pub active: Vec<bool>,
}

fn check_rows(graph: &Graph, z: &Matrix) -> Result<()> {
    if z.rows() != graph.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows, graph has {} nodes",
            z.rows(),
            graph.num_nodes()
        )));
    }
    Ok(())
}

pub fn neighbor_mean(graph: &Graph, z: &Matrix) -> Result<NeighborMean> {
    check_rows(graph, z)?;
    let mut means = Matrix::zeros(z.rows(), z.cols());
    let mut active = vec![false; z.rows()];
    for (i, flag) in active.iter_mut().enumerate() {
        let nbrs = graph.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        *flag = true;
        let inv = 1.0 / nbrs.len() as f64;
        let row = means.row_mut(i);
        for &j in nbrs {
            for (m, &v) in row.iter_mut().zip(z.row(j)) {
                *m += v;
            }
        }
        row.iter_mut().for_each(|m| *m *= inv);
    }
    Ok(NeighborMean { means, active })
}

/// Graph embedding smoothness
/// `δ = ‖Σ_i Σ_{j∈N(i)} (z_i − z_j)²‖₂ / (|E|·D)`,
/// where the square is elementwise, the double sum accumulates a
/// `D`-vector and `|E|` counts ordered pairs.
pub fn smoothness_delta(graph: &Graph, z: &Matrix) -> Result<f64> {
    check_rows(graph, z)?;
    if graph.num_edges() == 0 {
        return Err(Error::Edgeless("smoothness"));
    }
    if z.cols() == 0 {
        return Err(Error::EmptyTensor("smoothness"));
    }
    let mut acc = vec![0.0; z.cols()];
    for i in 0..graph.num_nodes() {
        let zi = z.row(i);
        for &j in graph.neighbors(i) {
            for ((a, &x), &y) in acc.iter_mut().zip(zi).zip(z.row(j)) {
                let d = x - y;
                *a += d * d;
            }
        }
    }
    let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(norm / (graph.num_edges() * z.cols()) as f64)
}
