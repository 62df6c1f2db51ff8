mod common;

use std::sync::Arc;

use bsg::autodiff::{finite_diff_check, Matrix};
use bsg::graph::gcn_normalize;
use bsg::model::{decode_dot, decode_edge, decode_edges_on_tape, encode, encode_on_tape, DecoderParams, EncoderParams};
use proptest::prelude::*;

use common::{dense_encode, dense_gcn, lcg_matrix};

#[test]
fn path_graph_matches_dense_oracle() {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
    let adj = gcn_normalize(&edges, 6).unwrap();
    let dense = dense_gcn(6, &edges);
    assert!(adj.matrix().to_dense().max_abs_diff(&dense) < 1e-15);

    let x = lcg_matrix(6, 4, 1);
    let enc = EncoderParams {
        w1: lcg_matrix(4, 5, 2),
        w2: lcg_matrix(5, 3, 3),
    };
    let z = encode(&adj, &x, &enc).unwrap();
    let want = dense_encode(&dense, &x, &enc.w1, &enc.w2);
    assert!(z.max_abs_diff(&want) < 1e-12, "diff {}", z.max_abs_diff(&want));
}

#[test]
fn two_node_graph_averages_exactly() {
    let adj = gcn_normalize(&[(0, 1)], 2).unwrap();
    let twos = Matrix::from_rows(&[[2.0, 0.0], [0.0, 2.0]]).unwrap();
    let out = adj.matrix().matmul(&twos).unwrap();
    assert_eq!(out, Matrix::filled(2, 2, 1.0));
}

#[test]
fn isolated_node_keeps_its_own_features() {
    let adj = gcn_normalize(&[(0, 1)], 3).unwrap();
    assert_eq!(adj.weight(2, 2), 1.0);
    assert_eq!(adj.weight(2, 0), 0.0);
}

#[test]
fn decoders_are_symmetric_in_their_endpoints() {
    let z = lcg_matrix(7, 4, 4);
    let dec = DecoderParams {
        v1: lcg_matrix(4, 6, 5),
        v2: lcg_matrix(6, 1, 6),
    };
    for u in 0..7 {
        for v in 0..7 {
            let (a, b) = (decode_edge(&z, u, v, &dec).unwrap(), decode_edge(&z, v, u, &dec).unwrap());
            assert_eq!(a, b);
            assert!((0.0..=1.0).contains(&a));
            assert_eq!(decode_dot(&z, u, v).unwrap(), decode_dot(&z, v, u).unwrap());
        }
    }
}

#[test]
fn decoder_on_tape_matches_pointwise_decoder() {
    let z = lcg_matrix(5, 3, 7);
    let dec = DecoderParams {
        v1: lcg_matrix(3, 4, 8),
        v2: lcg_matrix(4, 1, 9),
    };
    let pairs = [(0, 1), (2, 4), (3, 3)];
    let mut tape = bsg::autodiff::Tape::new();
    let zv = tape.constant(z.clone());
    let v1 = tape.constant(dec.v1.clone());
    let v2 = tape.constant(dec.v2.clone());
    let probs = decode_edges_on_tape(&mut tape, zv, &pairs, v1, v2).unwrap();
    for (k, &(u, v)) in pairs.iter().enumerate() {
        let want = decode_edge(&z, u, v, &dec).unwrap();
        assert!((tape.value(probs).get(k, 0) - want).abs() < 1e-15);
    }
}

#[test]
fn encode_then_decode_passes_gradient_check() {
    let edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)];
    let adj = Arc::clone(gcn_normalize(&edges, 5).unwrap().matrix());
    let x = lcg_matrix(5, 4, 10);
    let params = [lcg_matrix(4, 6, 11), lcg_matrix(6, 3, 12), lcg_matrix(3, 5, 13), lcg_matrix(5, 1, 14)];
    let pairs = [(0, 1), (1, 3), (4, 2), (0, 4)];
    let check = finite_diff_check(&params, 1e-5, |tape, v| {
        let xv = tape.constant(x.clone());
        let z = encode_on_tape(tape, &adj, xv, v[0], v[1])?;
        let p = decode_edges_on_tape(tape, z, &pairs, v[2], v[3])?;
        let logp = tape.log(p)?;
        tape.sum(logp)
    })
    .unwrap();
    assert!(check.max_rel_error < 1e-5, "{check:?}");
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    // Row perm[i] of the output is row i of the input.
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (i, &p) in perm.iter().enumerate() {
        out.row_mut(p).copy_from_slice(m.row(i));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encoder_is_permutation_equivariant(
        n in 2usize..=20,
        raw_edges in prop::collection::vec((0usize..20, 0usize..20), 0..60),
        perm_seed in any::<u64>(),
        weight_seed in 0u64..1000,
    ) {
        let edges: Vec<(usize, usize)> = raw_edges.into_iter().map(|(u, v)| (u % n, v % n)).filter(|(u, v)| u != v).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let x = lcg_matrix(n, 3, weight_seed);
        let enc = EncoderParams { w1: lcg_matrix(3, 4, weight_seed + 1), w2: lcg_matrix(4, 2, weight_seed + 2) };

        let z = encode(&gcn_normalize(&edges, n).unwrap(), &x, &enc).unwrap();
        let moved: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let zp = encode(&gcn_normalize(&moved, n).unwrap(), &permute_rows(&x, &perm), &enc).unwrap();
        prop_assert!(zp.max_abs_diff(&permute_rows(&z, &perm)) < 1e-10);
    }
}
