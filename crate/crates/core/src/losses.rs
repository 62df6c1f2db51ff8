//! Pretext and smoothness-balancing losses.
//!
//! Node-level losses are sums over nodes, not means. Isolated nodes have no
//! neighbor mean and are excluded from the neighbor and divergence terms via
//! an `active` mask.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var, COSINE_EPS};
use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::model::decode_edges_on_tape;

/// Decoder probabilities are clamped into `[PROB_CLAMP, 1 − PROB_CLAMP]`
/// before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
    pub mask_ratio: f64,
}

impl LossWeights {
    /// Tuned node-classification setting for Cora.
    pub const fn cora_defaults() -> Self {
        Self {
            lambda1: 0.0002,
            lambda2: 0.001,
            lambda3: 0.0009,
            margin: -0.2,
            mask_ratio: 0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {l} must be finite and >= 0")));
            }
        }
        if !(-1.0..=1.0).contains(&self.margin) {
            return Err(Error::InvalidArgument(format!("margin {} outside [-1, 1]", self.margin)));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::InvalidArgument(format!("mask ratio {} outside [0, 1]", self.mask_ratio)));
        }
        Ok(())
    }
}

/// Unweighted component losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l_st: f64,
    pub l_nei: f64,
    pub l_min: f64,
    pub l_div: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_st: f64,
    pub l_nei: f64,
    pub l_min: f64,
    pub l_div: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn parts(&self) -> LossParts {
        LossParts {
            l_st: self.l_st,
            l_nei: self.l_nei,
            l_min: self.l_min,
            l_div: self.l_div,
        }
    }
}

/// `total = l_st + λ₁·l_nei + λ₂·l_min + λ₃·l_div`.
pub fn bsg_total(parts: LossParts, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    let LossParts {
        l_st,
        l_nei,
        l_min,
        l_div,
    } = parts;
    if ![l_st, l_nei, l_min, l_div].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("bsg_total"));
    }
    Ok(LossBreakdown {
        l_st,
        l_nei,
        l_min,
        l_div,
        total: l_st + w.lambda1 * l_nei + w.lambda2 * l_min + w.lambda3 * l_div,
    })
}

fn active_weights(tape: &Tape, z: Var, active: &[bool]) -> Result<Vec<f64>> {
    let rows = tape.value(z).rows();
    if active.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "active mask has {} entries for {rows} rows",
            active.len()
        )));
    }
    Ok(active.iter().map(|&a| f64::from(u8::from(a))).collect())
}

/// `Σ_{i active} ‖z_x[i] − z_neigh[i]‖²`.
pub fn neighbor_loss(tape: &mut Tape, z_x: Var, z_neigh: Var, active: &[bool]) -> Result<Var> {
    let diff = tape.sub(z_x, z_neigh)?;
    let weights = active_weights(tape, diff, active)?;
    let sq = tape.square(diff)?;
    let masked = tape.scale_rows(sq, weights)?;
    tape.sum(masked)
}

/// `Σ_i ‖z_x[i] − z_s[i]‖²`. Gradient reaches both views.
pub fn minimal_loss(tape: &mut Tape, z_x: Var, z_s: Var) -> Result<Var> {
    let diff = tape.sub(z_x, z_s)?;
    let sq = tape.square(diff)?;
    tape.sum(sq)
}

/// `Σ_{i active} max(0, cos(z_x[i], z_neigh[i]) − m)`.
pub fn divergence_loss(tape: &mut Tape, z_x: Var, z_neigh: Var, margin: f64, active: &[bool]) -> Result<Var> {
    if !(-1.0..=1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin {margin} outside [-1, 1]")));
    }
    let sim = tape.cosine_rows(z_x, z_neigh, COSINE_EPS)?;
    let weights = active_weights(tape, sim, active)?;
    let shifted = tape.add_scalar(sim, -margin)?;
    let hinge = tape.relu(shifted)?;
    let masked = tape.scale_rows(hinge, weights)?;
    tape.sum(masked)
}

/// Masked-edge reconstruction: binary cross-entropy of the MLP decoder on
/// positive (masked) edges and sampled negatives, each side averaged.
pub fn structure_loss_edges(tape: &mut Tape, z: Var, pos: &[Edge], neg: &[Edge], v1: Var, v2: Var) -> Result<Var> {
    if pos.is_empty() {
        return Err(Error::EmptySet("positive (masked) edge set; mask ratio yields no masked edges"));
    }
    if neg.is_empty() {
        return Err(Error::EmptySet("negative edge set"));
    }
    let p_pos = decode_edges_on_tape(tape, z, pos, v1, v2)?;
    let p_pos = tape.clamp(p_pos, PROB_CLAMP, 1.0 - PROB_CLAMP)?;
    let log_pos = tape.log(p_pos)?;
    let pos_term = tape.mean(log_pos)?;

    let p_neg = decode_edges_on_tape(tape, z, neg, v1, v2)?;
    let p_neg = tape.clamp(p_neg, PROB_CLAMP, 1.0 - PROB_CLAMP)?;
    let flipped = tape.mul_scalar(p_neg, -1.0)?;
    let one_minus = tape.add_scalar(flipped, 1.0)?;
    let log_neg = tape.log(one_minus)?;
    let neg_term = tape.mean(log_neg)?;

    let both = tape.add(pos_term, neg_term)?;
    tape.mul_scalar(both, -1.0)
}

/// Mean squared error between `z[i]·feat_dec` and `x[i]` over masked nodes.
pub fn structure_loss_features(tape: &mut Tape, z: Var, masked_nodes: &[usize], x: Var, feat_dec: Var) -> Result<Var> {
    if masked_nodes.is_empty() {
        return Err(Error::EmptySet("masked node set"));
    }
    let zm = tape.gather_rows(z, masked_nodes.to_vec())?;
    let recon = tape.matmul(zm, feat_dec)?;
    let target = tape.gather_rows(x, masked_nodes.to_vec())?;
    let diff = tape.sub(recon, target)?;
    let sq = tape.square(diff)?;
    tape.mean(sq)
}

/// Records `l_st + λ₁·l_nei + λ₂·l_min + λ₃·l_div` on the tape.
pub fn total_on_tape(tape: &mut Tape, l_st: Var, l_nei: Var, l_min: Var, l_div: Var, w: &LossWeights) -> Result<Var> {
    let mut total = l_st;
    for (term, lambda) in [(l_nei, w.lambda1), (l_min, w.lambda2), (l_div, w.lambda3)] {
        let weighted = tape.mul_scalar(term, lambda)?;
        total = tape.add(total, weighted)?;
    }
    Ok(total)
}

fn check_mse(mse: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let d = d as f64;
    if !(0.0..=4.0 * d).contains(&mse) {
        return Err(Error::InvalidArgument(format!("mse {mse} outside [0, {}]", 4.0 * d)));
    }
    if mse == 0.0 || mse == 4.0 * d {
        return Err(Error::UnboundedInformation(mse));
    }
    Ok(d)
}

/// Gaussian mutual information implied by an MSE between two zero-mean,
/// unit-variance `d`-dimensional variables: with `ρ = 1 − mse/2d`,
/// `I = −(d/2)·ln(1 − ρ²)`.
pub fn mi_from_mse(mse: f64, d: usize) -> Result<f64> {
    let d = check_mse(mse, d)?;
    let rho = 1.0 - mse / (2.0 * d);
    Ok(-(d / 2.0) * (1.0 - rho * rho).ln())
}

/// Small-MSE approximation `−(d/2)·ln(mse/d)`.
pub fn mi_from_mse_approx(mse: f64, d: usize) -> Result<f64> {
    let d = check_mse(mse, d)?;
    Ok(-(d / 2.0) * (mse / d).ln())
}

/// `−(d/2)·ln(1 − ρ²)`.
pub fn gaussian_mi(rho: f64, d: usize) -> f64 {
    -(d as f64 / 2.0) * (1.0 - rho * rho).ln()
}
