mod common;

use std::collections::HashSet;

use bsg::autodiff::Matrix;
use bsg::graph::{
    gcn_normalize, generate_sbm, load_graph, node_split, sample_edge_mask, sample_negative_edges, split_edges_holdout,
    write_edges, write_features, write_labels, Graph, SbmConfig,
};
use proptest::prelude::*;

fn arbitrary_graph() -> impl Strategy<Value = Graph> {
    (3usize..=30).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 1..80).prop_filter_map("needs an edge", move |raw| {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|(u, v)| u != v).collect();
            if edges.is_empty() {
                return None;
            }
            Graph::new(&edges, Matrix::zeros(n, 1), None).ok()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn normalized_adjacency_is_symmetric_with_positive_diagonal(g in arbitrary_graph()) {
        let n = g.num_nodes();
        let adj = gcn_normalize(&g.undirected_edges(), n).unwrap();
        let dense = adj.matrix().to_dense();
        let oracle = common::dense_gcn(n, &g.undirected_edges());
        prop_assert!(dense.max_abs_diff(&oracle) < 1e-15);
        for i in 0..n {
            prop_assert!(dense.get(i, i) > 0.0);
            for j in 0..n {
                prop_assert_eq!(dense.get(i, j), dense.get(j, i));
                if i == j || g.has_edge(i, j) {
                    let want = 1.0 / (((g.degree(i) + 1) * (g.degree(j) + 1)) as f64).sqrt();
                    prop_assert!((dense.get(i, j) - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn edge_mask_partitions_the_edge_set(g in arbitrary_graph(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let split = sample_edge_mask(&g, p, seed).unwrap();
        let mut all: Vec<_> = split.visible.iter().chain(&split.masked).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, g.undirected_edges());
        prop_assert_eq!(split, sample_edge_mask(&g, p, seed).unwrap());
    }

    #[test]
    fn negatives_avoid_edges_self_loops_and_repeats(g in arbitrary_graph(), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let n = g.num_nodes();
        let capacity = n * (n - 1) / 2 - g.num_undirected_edges();
        let count = (frac * capacity as f64) as usize;
        let neg = sample_negative_edges(&g, count, seed).unwrap();
        prop_assert_eq!(neg.pairs.len(), count);
        let unique: HashSet<_> = neg.pairs.iter().collect();
        prop_assert_eq!(unique.len(), count);
        for &(u, v) in &neg.pairs {
            prop_assert!(u != v && !g.has_edge(u, v) && !g.has_edge(v, u));
        }
        prop_assert!(sample_negative_edges(&g, capacity + 1, seed).is_err());
    }
}

#[test]
fn edge_mask_ratio_concentrates_near_p() {
    let g = generate_sbm(&SbmConfig::fixture(2)).unwrap();
    let total: usize = (0..50).map(|s| sample_edge_mask(&g, 0.7, s).unwrap().masked.len()).sum();
    let frac = total as f64 / (50 * g.num_undirected_edges()) as f64;
    assert!((frac - 0.7).abs() < 0.02, "{frac}");
}

#[test]
fn holdout_sets_are_disjoint_and_removed_from_training() {
    let g = generate_sbm(&SbmConfig::fixture(3)).unwrap();
    let split = split_edges_holdout(&g, 0.05, 0.1, 8).unwrap();
    let m = g.num_undirected_edges();
    assert_eq!(split.val_pos.len(), m * 5 / 100);
    assert_eq!(split.test_pos.len(), m / 10);
    assert_eq!(split.train.num_undirected_edges() + split.val_pos.len() + split.test_pos.len(), m);
    for &(u, v) in split.val_pos.iter().chain(&split.test_pos) {
        assert!(g.has_edge(u, v) && !split.train.has_edge(u, v));
    }
    let negs: HashSet<_> = split.val_neg.iter().chain(&split.test_neg).collect();
    assert_eq!(negs.len(), split.val_neg.len() + split.test_neg.len());
    for &&(u, v) in &negs {
        assert!(!g.has_edge(u, v));
    }
    assert_eq!(split.train.features(), g.features());
}

#[test]
fn node_split_is_one_one_eight_and_disjoint() {
    let s = node_split(200, 4).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (20, 20, 160));
    let all: HashSet<_> = s.train.iter().chain(&s.val).chain(&s.test).collect();
    assert_eq!(all.len(), 200);
    assert_ne!(s, node_split(200, 5).unwrap());
}

#[test]
fn sbm_is_homophilic_and_reproducible() {
    let cfg = SbmConfig::fixture(6);
    let g = generate_sbm(&cfg).unwrap();
    assert_eq!(g.num_nodes(), 200);
    let labels = g.labels().unwrap();
    let edges = g.undirected_edges();
    let inside = edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    assert!(inside as f64 / edges.len() as f64 > 0.8);
    assert_eq!(edges, generate_sbm(&cfg).unwrap().undirected_edges());
}

#[test]
fn graph_files_round_trip() {
    let g = generate_sbm(&SbmConfig::fixture(7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (e, f, l) = (dir.path().join("e.txt"), dir.path().join("f.txt"), dir.path().join("l.txt"));
    write_edges(&e, &g.undirected_edges()).unwrap();
    write_features(&f, g.features()).unwrap();
    write_labels(&l, g.labels().unwrap()).unwrap();
    let back = load_graph(&e, &f, Some(&l)).unwrap();
    assert_eq!(back.undirected_edges(), g.undirected_edges());
    assert_eq!(back.features().as_slice(), g.features().as_slice());
    assert_eq!(back.labels(), g.labels());
}
