//! Training loop.
//!
//! Each epoch draws a fresh edge mask, encodes the visible edges (`z_x`) and
//! the masked-out edges (`z_s`) with the same encoder, takes neighbor means
//! of `z_x` over the original graph, assembles the four losses and applies
//! one Adam step. Inference encodes the full, unmasked graph.

mod adam;
mod config;

use std::sync::Arc;
use std::time::Instant;

use rand::RngExt;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use config::{Pretext, TrainConfig, CONFIG_KEYS};

use crate::autodiff::{Matrix, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{
    gcn_normalize, sample_edge_mask, sample_negative_edges, smoothness_delta, Edge, Graph, NormalizedAdjacency,
};
use crate::losses::{
    bsg_total, divergence_loss, minimal_loss, neighbor_loss, structure_loss_edges, structure_loss_features,
    total_on_tape, LossBreakdown, LossParts, LossWeights,
};
use crate::model::{encode, encode_on_tape, init_feature_decoder, init_params, ModelParams};
use crate::seed::{derive_seed, derived_rng};

/// Per-graph quantities that stay fixed during training.
#[derive(Debug, Clone)]
pub struct TrainingContext<'g> {
    graph: &'g Graph,
    full_adjacency: NormalizedAdjacency,
    mean_operator: Arc<SparseMatrix>,
    active: Vec<bool>,
}

impl<'g> TrainingContext<'g> {
    pub fn new(graph: &'g Graph) -> Result<Self> {
        if graph.num_edges() == 0 {
            return Err(Error::Edgeless("training"));
        }
        Ok(Self {
            graph,
            full_adjacency: gcn_normalize(&graph.undirected_edges(), graph.num_nodes())?,
            mean_operator: Arc::new(graph.mean_operator()),
            active: graph.active_mask(),
        })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn full_adjacency(&self) -> &NormalizedAdjacency {
        &self.full_adjacency
    }
}

/// The randomized part of one training step.
#[derive(Debug, Clone)]
pub enum EpochInputs {
    Edge {
        visible: Arc<SparseMatrix>,
        masked: Arc<SparseMatrix>,
        positives: Vec<Edge>,
        negatives: Vec<Edge>,
    },
    Feature {
        masked_nodes: Vec<usize>,
        masked_features: Matrix,
    },
}

pub fn sample_epoch_inputs(ctx: &TrainingContext<'_>, cfg: &TrainConfig, epoch_seed: u64) -> Result<EpochInputs> {
    let graph = ctx.graph;
    let n = graph.num_nodes();
    match cfg.pretext {
        Pretext::EdgeRecon => {
            let split = sample_edge_mask(graph, cfg.mask_ratio, derive_seed(epoch_seed, "mask", 0))?;
            if split.masked.is_empty() {
                return Err(Error::EmptySet(
                    "masked edge set; the structure loss needs at least one masked edge (mask_ratio > 0)",
                ));
            }
            let negatives = sample_negative_edges(graph, split.masked.len(), derive_seed(epoch_seed, "negatives", 0))?;
            Ok(EpochInputs::Edge {
                visible: Arc::clone(gcn_normalize(&split.visible, n)?.matrix()),
                masked: Arc::clone(gcn_normalize(&split.masked, n)?.matrix()),
                positives: split.masked,
                negatives: negatives.pairs,
            })
        }
        Pretext::FeatureRecon => {
            if !(0.0..=1.0).contains(&cfg.mask_ratio) {
                return Err(Error::InvalidArgument(format!("mask ratio {} outside [0, 1]", cfg.mask_ratio)));
            }
            let mut rng = derived_rng(epoch_seed, "feature-mask", 0);
            let masked_nodes: Vec<usize> = (0..n).filter(|_| rng.random_bool(cfg.mask_ratio)).collect();
            if masked_nodes.is_empty() {
                return Err(Error::EmptySet("masked node set; feature reconstruction needs mask_ratio > 0"));
            }
            let mut masked_features = graph.features().clone();
            for &i in &masked_nodes {
                masked_features.row_mut(i).fill(0.0);
            }
            Ok(EpochInputs::Feature {
                masked_nodes,
                masked_features,
            })
        }
    }
}

/// Parameter handles on a tape, in [`ModelParams::tensors`] order.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub w1: Var,
    pub w2: Var,
    pub v1: Var,
    pub v2: Var,
    pub feature_decoder: Option<Var>,
}

impl ParamVars {
    pub fn from_slice(vars: &[Var]) -> Result<Self> {
        match *vars {
            [w1, w2, v1, v2] => Ok(Self { w1, w2, v1, v2, feature_decoder: None }),
            [w1, w2, v1, v2, f] => Ok(Self { w1, w2, v1, v2, feature_decoder: Some(f) }),
            _ => Err(Error::DimensionMismatch(format!("expected 4 or 5 parameter tensors, got {}", vars.len()))),
        }
    }

    pub fn record(tape: &mut Tape, params: &ModelParams) -> Self {
        let vars: Vec<Var> = params.tensors().into_iter().map(|m| tape.param(m.clone())).collect();
        Self::from_slice(&vars).expect("ModelParams has 4 or 5 tensors")
    }

    pub fn to_vec(self) -> Vec<Var> {
        let mut out = vec![self.w1, self.w2, self.v1, self.v2];
        out.extend(self.feature_decoder);
        out
    }
}

/// Handles to the recorded objective and its parts.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    pub total: Var,
    pub l_st: Var,
    pub l_nei: Var,
    pub l_min: Var,
    pub l_div: Var,
    pub z_x: Var,
    pub z_s: Var,
}

/// Records the full training objective for one epoch's inputs.
pub fn bsg_objective(
    tape: &mut Tape,
    ctx: &TrainingContext<'_>,
    inputs: &EpochInputs,
    params: ParamVars,
    weights: &LossWeights,
) -> Result<Objective> {
    weights.validate()?;
    let x_full = ctx.graph.features();
    let (z_x, z_s, l_st) = match inputs {
        EpochInputs::Edge {
            visible,
            masked,
            positives,
            negatives,
        } => {
            let x = tape.constant(x_full.clone());
            let z_x = encode_on_tape(tape, visible, x, params.w1, params.w2)?;
            let z_s = encode_on_tape(tape, masked, x, params.w1, params.w2)?;
            let l_st = structure_loss_edges(tape, z_x, positives, negatives, params.v1, params.v2)?;
            (z_x, z_s, l_st)
        }
        EpochInputs::Feature {
            masked_nodes,
            masked_features,
        } => {
            let feat_dec = params
                .feature_decoder
                .ok_or_else(|| Error::InvalidArgument("feature_recon pretext needs a feature decoder".into()))?;
            let adj = ctx.full_adjacency.matrix();
            let x_masked = tape.constant(masked_features.clone());
            let x = tape.constant(x_full.clone());
            let z_x = encode_on_tape(tape, adj, x_masked, params.w1, params.w2)?;
            let z_s = encode_on_tape(tape, adj, x, params.w1, params.w2)?;
            let l_st = structure_loss_features(tape, z_x, masked_nodes, x, feat_dec)?;
            (z_x, z_s, l_st)
        }
    };
    let z_neigh = tape.spmm(&ctx.mean_operator, z_x)?;
    let l_nei = neighbor_loss(tape, z_x, z_neigh, &ctx.active)?;
    let l_min = minimal_loss(tape, z_x, z_s)?;
    let l_div = divergence_loss(tape, z_x, z_neigh, weights.margin, &ctx.active)?;
    let total = total_on_tape(tape, l_st, l_nei, l_min, l_div, weights)?;
    Ok(Objective {
        total,
        l_st,
        l_nei,
        l_min,
        l_div,
        z_x,
        z_s,
    })
}

/// Result of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochOutcome {
    pub losses: LossBreakdown,
    /// Smoothness of the training-view embedding `z_x` on the original graph.
    pub delta: f64,
}

/// Runs one step: sample inputs from `epoch_seed`, evaluate, backpropagate,
/// update `params` and `state` in place.
pub fn train_epoch(
    ctx: &TrainingContext<'_>,
    params: &mut ModelParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
    epoch_seed: u64,
) -> Result<EpochOutcome> {
    let inputs = sample_epoch_inputs(ctx, cfg, epoch_seed)?;
    let weights = cfg.weights();
    let mut tape = Tape::new();
    let vars = ParamVars::record(&mut tape, params);
    let obj = bsg_objective(&mut tape, ctx, &inputs, vars, &weights)?;

    let parts = LossParts {
        l_st: tape.scalar(obj.l_st)?,
        l_nei: tape.scalar(obj.l_nei)?,
        l_min: tape.scalar(obj.l_min)?,
        l_div: tape.scalar(obj.l_div)?,
    };
    let losses = bsg_total(parts, &weights)?;
    let delta = smoothness_delta(ctx.graph, tape.value(obj.z_x))?;

    let grads = tape.backward(obj.total)?;
    let grads: Vec<Matrix> = vars.to_vec().into_iter().map(|v| grads.wrt(v)).collect();
    adam_step(&mut params.tensors_mut(), &grads, state, cfg.learning_rate, cfg.weight_decay)?;
    Ok(EpochOutcome { losses, delta })
}

/// One line of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub losses: LossBreakdown,
    pub delta: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// One JSON object per epoch, newline separated.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("history records serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Embeddings of the full graph under the trained encoder.
    pub embeddings: Matrix,
    pub params: ModelParams,
    pub history: TrainHistory,
}

pub fn initial_params(cfg: &TrainConfig, node_features: usize) -> Result<ModelParams> {
    let (encoder, decoder) = init_params(&cfg.model_dims(node_features), cfg.seed)?;
    let feature_decoder =
        (cfg.pretext == Pretext::FeatureRecon).then(|| init_feature_decoder(cfg.emb_dim, node_features, cfg.seed));
    Ok(ModelParams {
        encoder,
        decoder,
        feature_decoder,
    })
}

/// Seed of epoch `epoch` under `cfg`.
pub fn epoch_seed(cfg: &TrainConfig, epoch: usize) -> u64 {
    derive_seed(cfg.seed, "epoch", epoch as u64)
}

pub fn train(graph: &Graph, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let ctx = TrainingContext::new(graph)?;
    let mut params = initial_params(cfg, graph.feature_dim())?;
    let mut state = AdamState::new(params.tensors());
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let outcome = train_epoch(&ctx, &mut params, &mut state, cfg, epoch_seed(cfg, epoch))?;
        history.epochs.push(EpochRecord {
            epoch,
            losses: outcome.losses,
            delta: outcome.delta,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    let embeddings = encode(&ctx.full_adjacency, graph.features(), &params.encoder)?;
    Ok(TrainOutput {
        embeddings,
        params,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmConfig};

    fn small_graph() -> Graph {
        generate_sbm(&SbmConfig {
            blocks: 2,
            nodes_per_block: 10,
            p_in: 0.4,
            p_out: 0.05,
            feature_dim: 6,
            feature_noise: 0.5,
            seed: 3,
        })
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            hidden: 8,
            emb_dim: 4,
            decoder_hidden: 4,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_mask_ratio_surfaces_structure_error() {
        let g = small_graph();
        let cfg = TrainConfig { mask_ratio: 0.0, ..small_cfg() };
        let err = train(&g, &cfg).unwrap_err();
        assert!(matches!(err, Error::EmptySet(_)), "{err}");
        assert!(err.to_string().contains("masked edge"));
    }

    #[test]
    fn history_accounting() {
        let g = small_graph();
        let cfg = small_cfg();
        let out = train(&g, &cfg).unwrap();
        assert_eq!(out.history.epochs.len(), cfg.epochs);
        let w = cfg.weights();
        for r in &out.history.epochs {
            let l = r.losses;
            let recomputed = l.l_st + w.lambda1 * l.l_nei + w.lambda2 * l.l_min + w.lambda3 * l.l_div;
            assert!((l.total - recomputed).abs() <= 1e-12);
            assert!(r.delta >= 0.0);
        }
        assert_eq!(out.embeddings.shape(), (20, 4));
        assert_eq!(out.history.to_jsonl().lines().count(), 5);
    }

    #[test]
    fn one_epoch_is_step_plus_inference() {
        let g = small_graph();
        let cfg = TrainConfig { epochs: 1, ..small_cfg() };
        let out = train(&g, &cfg).unwrap();
        let ctx = TrainingContext::new(&g).unwrap();
        let mut params = initial_params(&cfg, g.feature_dim()).unwrap();
        let mut state = AdamState::new(params.tensors());
        train_epoch(&ctx, &mut params, &mut state, &cfg, epoch_seed(&cfg, 0)).unwrap();
        assert_eq!(params, out.params);
        let z = encode(ctx.full_adjacency(), g.features(), &params.encoder).unwrap();
        assert_eq!(z, out.embeddings);
    }

    #[test]
    fn deterministic() {
        let g = small_graph();
        let a = train(&g, &small_cfg()).unwrap();
        let b = train(&g, &small_cfg()).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn feature_pretext_trains() {
        let g = small_graph();
        let cfg = TrainConfig {
            pretext: Pretext::FeatureRecon,
            ..small_cfg()
        };
        let out = train(&g, &cfg).unwrap();
        assert!(out.params.feature_decoder.is_some());
        assert!(out.embeddings.is_finite());
    }

    #[test]
    fn edgeless_graph_rejected() {
        let g = Graph::new(&[], Matrix::zeros(4, 2), None).unwrap();
        assert!(matches!(train(&g, &small_cfg()), Err(Error::Edgeless(_))));
    }
}
