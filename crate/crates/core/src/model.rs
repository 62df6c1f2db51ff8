//! Two-layer GCN encoder and edge decoders.

use std::sync::Arc;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::autodiff::{dot, Matrix, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{Edge, NormalizedAdjacency};
use crate::seed;

/// Layer widths of the encoder, the edge decoder and the optional feature
/// decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub node_features: usize,
    pub hidden: usize,
    pub embedding: usize,
    pub decoder_hidden: usize,
}

/// GCN weights: `Z = Â·ReLU(Â·X·W1)·W2`, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w1: Matrix,
    pub w2: Matrix,
}

/// Edge MLP: `σ(ReLU((z_u ∘ z_v)·V1)·v2)`, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub v1: Matrix,
    pub v2: Matrix,
}

/// Everything the trainer optimizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    /// Linear map from embeddings back to node features, present only for
    /// the feature-reconstruction pretext.
    pub feature_decoder: Option<Matrix>,
}

impl ModelParams {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            node_features: self.encoder.w1.rows(),
            hidden: self.encoder.w1.cols(),
            embedding: self.encoder.w2.cols(),
            decoder_hidden: self.decoder.v1.cols(),
        }
    }

    /// Parameters in a fixed order: W1, W2, V1, v2, then the feature decoder.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.encoder.w1, &self.encoder.w2, &self.decoder.v1, &self.decoder.v2];
        out.extend(self.feature_decoder.as_ref());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![
            &mut self.encoder.w1,
            &mut self.encoder.w2,
            &mut self.decoder.v1,
            &mut self.decoder.v2,
        ];
        out.extend(self.feature_decoder.as_mut());
        out
    }
}

/// Uniform in `±√(6/(fan_in+fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut seed::Rng) -> Matrix {
    let bound = glorot_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("length matches by construction")
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn init_params(dims: &ModelDims, seed: u64) -> Result<(EncoderParams, DecoderParams)> {
    let ModelDims {
        node_features,
        hidden,
        embedding,
        decoder_hidden,
    } = *dims;
    if [node_features, hidden, embedding, decoder_hidden].contains(&0) {
        return Err(Error::InvalidArgument(format!("model dimensions must be >= 1, got {dims:?}")));
    }
    let mut rng = seed::derived_rng(seed, "init", 0);
    let encoder = EncoderParams {
        w1: glorot_uniform(node_features, hidden, &mut rng),
        w2: glorot_uniform(hidden, embedding, &mut rng),
    };
    let decoder = DecoderParams {
        v1: glorot_uniform(embedding, decoder_hidden, &mut rng),
        v2: glorot_uniform(decoder_hidden, 1, &mut rng),
    };
    Ok((encoder, decoder))
}

/// Feature decoder initialization, on its own seed stream.
pub fn init_feature_decoder(embedding: usize, node_features: usize, seed: u64) -> Matrix {
    glorot_uniform(embedding, node_features, &mut seed::derived_rng(seed, "init-feature-decoder", 0))
}

pub fn encode_on_tape(tape: &mut Tape, adj: &Arc<SparseMatrix>, x: Var, w1: Var, w2: Var) -> Result<Var> {
    let xw = tape.matmul(x, w1)?;
    let h = tape.spmm(adj, xw)?;
    let h = tape.relu(h)?;
    let hw = tape.matmul(h, w2)?;
    tape.spmm(adj, hw)
}

pub fn encode(adj: &NormalizedAdjacency, x: &Matrix, params: &EncoderParams) -> Result<Matrix> {
    if x.rows() != adj.num_nodes() {
        return Err(Error::ShapeMismatch {
            op: "encode",
            lhs: (adj.num_nodes(), adj.num_nodes()),
            rhs: x.shape(),
        });
    }
    let mut tape = Tape::new();
    let x = tape.constant(x.clone());
    let w1 = tape.constant(params.w1.clone());
    let w2 = tape.constant(params.w2.clone());
    let z = encode_on_tape(&mut tape, adj.matrix(), x, w1, w2)?;
    Ok(tape.value(z).clone())
}

fn endpoints(pairs: &[Edge]) -> (Vec<usize>, Vec<usize>) {
    pairs.iter().copied().unzip()
}

/// Edge probabilities for `pairs`, as a `|pairs| x 1` node.
pub fn decode_edges_on_tape(tape: &mut Tape, z: Var, pairs: &[Edge], v1: Var, v2: Var) -> Result<Var> {
    let (us, vs) = endpoints(pairs);
    let zu = tape.gather_rows(z, us)?;
    let zv = tape.gather_rows(z, vs)?;
    let prod = tape.mul(zu, zv)?;
    let h = tape.matmul(prod, v1)?;
    let h = tape.relu(h)?;
    let logits = tape.matmul(h, v2)?;
    tape.sigmoid(logits)
}

fn check_node(z: &Matrix, node: usize) -> Result<()> {
    if node >= z.rows() {
        return Err(Error::IndexOutOfRange {
            index: node,
            num_nodes: z.rows(),
        });
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// MLP decoder score for one pair.
pub fn decode_edge(z: &Matrix, u: usize, v: usize, dec: &DecoderParams) -> Result<f64> {
    check_node(z, u)?;
    check_node(z, v)?;
    if dec.v1.rows() != z.cols() || dec.v2.rows() != dec.v1.cols() || dec.v2.cols() != 1 {
        return Err(Error::ShapeMismatch {
            op: "decode_edge",
            lhs: z.shape(),
            rhs: dec.v1.shape(),
        });
    }
    let prod: Vec<f64> = z.row(u).iter().zip(z.row(v)).map(|(a, b)| a * b).collect();
    let mut logit = 0.0;
    for k in 0..dec.v1.cols() {
        let h: f64 = prod.iter().enumerate().map(|(i, p)| p * dec.v1.get(i, k)).sum();
        if h > 0.0 {
            logit += h * dec.v2.get(k, 0);
        }
    }
    Ok(sigmoid(logit))
}

/// `σ(⟨z_u, z_v⟩)`.
pub fn decode_dot(z: &Matrix, u: usize, v: usize) -> Result<f64> {
    check_node(z, u)?;
    check_node(z, v)?;
    Ok(sigmoid(dot(z.row(u), z.row(v))))
}
