//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use bsg::autodiff::Matrix;
use bsg::trainer::TrainConfig;

/// Pairwise Mann–Whitney count and rank-by-rank precision, written without
/// sorting tricks. Returns `(auc %, ap %)`.
pub fn brute_force_rank(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let pos: Vec<usize> = (0..scores.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..scores.len()).filter(|&i| !labels[i]).collect();
    let mut credit: u128 = 0;
    for &p in &pos {
        for &n in &neg {
            if scores[p] > scores[n] {
                credit += 2;
            } else if scores[p] == scores[n] {
                credit += 1;
            }
        }
    }
    let auc = 100.0 * credit as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64;

    // Item j ranks ahead of item i when it scores higher, or ties with a
    // smaller index.
    let ahead = |j: usize, i: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    let mut at_rank: Vec<(usize, usize)> = pos
        .iter()
        .map(|&i| {
            let rank = 1 + (0..scores.len()).filter(|&j| ahead(j, i)).count();
            let hits = 1 + pos.iter().filter(|&&j| ahead(j, i)).count();
            (rank, hits)
        })
        .collect();
    at_rank.sort();
    let mut sum = 0.0;
    for (rank, hits) in at_rank {
        sum += hits as f64 / rank as f64;
    }
    (auc, 100.0 * sum / pos.len() as f64)
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` built densely from an undirected edge list.
pub fn dense_gcn(n: usize, edges: &[(usize, usize)]) -> Matrix {
    let mut a = Matrix::identity(n);
    for &(u, v) in edges {
        if u != v {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    out
}

pub fn dense_encode(adj: &Matrix, x: &Matrix, w1: &Matrix, w2: &Matrix) -> Matrix {
    let h = adj.matmul(&x.matmul(w1).unwrap()).unwrap().map(|v| v.max(0.0));
    adj.matmul(&h.matmul(w2).unwrap()).unwrap()
}

/// Model size and schedule used for the desk-scale SBM runs.
pub fn desk_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: 64,
        emb_dim: 32,
        epochs: 300,
        seed,
        ..TrainConfig::default()
    }
}

/// Deterministic pseudo-random reals in `[-1, 1)` for test fixtures.
pub fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..rows * cols)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}
