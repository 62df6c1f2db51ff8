use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::RngExt;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::seed;

/// Partition of a graph's undirected edges into visible and masked sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMaskSplit {
    pub visible: Vec<Edge>,
    pub masked: Vec<Edge>,
    pub mask_ratio: f64,
    pub seed: u64,
}

/// Masks each undirected edge independently with probability `p`.
pub fn sample_edge_mask(graph: &Graph, p: f64, seed: u64) -> Result<EdgeMaskSplit> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mask ratio {p} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    let (masked, visible) = graph
        .undirected_edges()
        .into_iter()
        .partition(|_| rng.random_bool(p));
    Ok(EdgeMaskSplit {
        visible,
        masked,
        mask_ratio: p,
        seed,
    })
}

/// Node pairs that are not edges of the graph they were sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeEdgeSet {
    pub pairs: Vec<Edge>,
    pub seed: u64,
}

/// Draws `count` distinct non-edges uniformly at random.
///
/// Uses rejection sampling while non-edges are plentiful and falls back to
/// shuffling the full non-edge list when `count` exceeds half of them.
pub fn sample_negative_edges(graph: &Graph, count: usize, seed: u64) -> Result<NegativeEdgeSet> {
    let n = graph.num_nodes();
    let capacity = (n * n.saturating_sub(1) / 2).saturating_sub(graph.num_undirected_edges());
    if count > capacity {
        return Err(Error::Infeasible(format!(
            "{count} negative edges requested but only {capacity} non-edges exist"
        )));
    }
    let mut rng = seed::rng(seed);
    let pairs = if count * 2 <= capacity {
        let mut seen = HashSet::with_capacity(count);
        let mut pairs = Vec::with_capacity(count);
        while pairs.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v || graph.has_edge(u, v) {
                continue;
            }
            let e = (u.min(v), u.max(v));
            if seen.insert(e) {
                pairs.push(e);
            }
        }
        pairs
    } else {
        let mut all: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !graph.has_edge(u, v))
            .collect();
        let (chosen, _) = all.partial_shuffle(&mut rng, count);
        chosen.to_vec()
    };
    Ok(NegativeEdgeSet { pairs, seed })
}

/// Link-prediction holdout: training graph plus positive/negative pairs for
/// validation and test.
#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub train: Graph,
    pub val_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

fn holdout_count(frac: f64, total: usize) -> usize {
    // Small slack so that e.g. 0.29 * 100 counts as 29.
    (frac * total as f64 + 1e-9).floor() as usize
}

/// Removes `val_frac` and `test_frac` of the undirected edges from the graph
/// and pairs each held-out set with as many sampled non-edges.
pub fn split_edges_holdout(graph: &Graph, val_frac: f64, test_frac: f64, seed: u64) -> Result<LinkSplit> {
    if !(val_frac >= 0.0 && test_frac >= 0.0 && val_frac + test_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fractions ({val_frac}, {test_frac}) must be non-negative and sum below 1"
        )));
    }
    let mut edges = graph.undirected_edges();
    let n_val = holdout_count(val_frac, edges.len());
    let n_test = holdout_count(test_frac, edges.len());
    if (val_frac > 0.0 && n_val == 0) || (test_frac > 0.0 && n_test == 0) {
        return Err(Error::Infeasible(format!(
            "{} edges are too few for holdout fractions ({val_frac}, {test_frac})",
            edges.len()
        )));
    }
    edges.shuffle(&mut seed::derived_rng(seed, "holdout-positives", 0));
    let mut val_pos = edges[..n_val].to_vec();
    let mut test_pos = edges[n_val..n_val + n_test].to_vec();
    let mut train_edges = edges[n_val + n_test..].to_vec();
    val_pos.sort_unstable();
    test_pos.sort_unstable();
    train_edges.sort_unstable();

    let negatives = sample_negative_edges(graph, n_val + n_test, seed::derive_seed(seed, "holdout-negatives", 0))?;
    let val_neg = negatives.pairs[..n_val].to_vec();
    let test_neg = negatives.pairs[n_val..].to_vec();

    Ok(LinkSplit {
        train: graph.with_edges(&train_edges)?,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Disjoint train/validation/test node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 1:1:8 node split; train and validation get `floor(N/10)` nodes
/// each and the remainder goes to test.
pub fn node_split(num_nodes: usize, seed: u64) -> Result<NodeSplit> {
    if num_nodes < 10 {
        return Err(Error::InvalidArgument(format!(
            "node split needs at least 10 nodes, got {num_nodes}"
        )));
    }
    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut seed::rng(seed));
    let tenth = num_nodes / 10;
    let mut train = order[..tenth].to_vec();
    let mut val = order[tenth..2 * tenth].to_vec();
    let mut test = order[2 * tenth..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(NodeSplit { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(edges, Matrix::zeros(n, 1), None).unwrap()
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        graph(n, &edges)
    }

    #[test]
    fn mask_boundaries() {
        let g = path(20);
        let none = sample_edge_mask(&g, 0.0, 3).unwrap();
        assert!(none.masked.is_empty());
        assert_eq!(none.visible.len(), 19);
        let all = sample_edge_mask(&g, 1.0, 3).unwrap();
        assert!(all.visible.is_empty());
        assert!(sample_edge_mask(&g, 1.5, 3).is_err());
        assert!(sample_edge_mask(&g, -0.1, 3).is_err());
    }

    #[test]
    fn mask_is_a_partition() {
        let g = path(50);
        for p in [0.3, 0.7] {
            let s = sample_edge_mask(&g, p, 11).unwrap();
            let mut all: Vec<_> = s.visible.iter().chain(&s.masked).copied().collect();
            all.sort_unstable();
            assert_eq!(all, g.undirected_edges());
            assert_eq!(s, sample_edge_mask(&g, p, 11).unwrap());
        }
    }

    #[test]
    fn negatives_forced_and_infeasible() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(matches!(sample_negative_edges(&tri, 1, 0), Err(Error::Infeasible(_))));
        let p = path(3);
        assert_eq!(sample_negative_edges(&p, 1, 0).unwrap().pairs, vec![(0, 2)]);
    }

    #[test]
    fn negatives_dense_fallback_is_exhaustive() {
        let p = path(6);
        let all = sample_negative_edges(&p, 10, 5).unwrap();
        let mut pairs = all.pairs.clone();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|&(u, v)| u < v && !p.has_edge(u, v)));
    }

    #[test]
    fn holdout_identity_and_counts() {
        let g = path(30);
        let s = split_edges_holdout(&g, 0.0, 0.0, 1).unwrap();
        assert_eq!(s.train, g);
        assert!(s.val_pos.is_empty() && s.test_pos.is_empty() && s.val_neg.is_empty());
        assert!(split_edges_holdout(&g, 0.5, 0.5, 1).is_err());
        assert!(split_edges_holdout(&path(5), 0.1, 0.1, 1).is_err());
    }

    #[test]
    fn node_split_sizes() {
        let s = node_split(10, 4).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 8));
        let s = node_split(105, 4).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (10, 10, 85));
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..105).collect::<Vec<_>>());
        assert_eq!(s, node_split(105, 4).unwrap());
        assert!(node_split(9, 0).is_err());
    }
}
