use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

/// Stochastic block model with block-indicator features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Total feature width; the first `blocks` columns carry the indicator.
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub feature_noise: f64,
    pub seed: u64,
}

impl SbmConfig {
    /// The two-block homophilic fixture used throughout the tests.
    pub fn fixture(seed: u64) -> Self {
        Self {
            blocks: 2,
            nodes_per_block: 100,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 16,
            feature_noise: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::InvalidArgument("SBM needs at least one block and one node per block".into()));
        }
        if self.feature_dim < self.blocks {
            return Err(Error::InvalidArgument(format!(
                "feature_dim {} cannot hold {} block indicators",
                self.feature_dim, self.blocks
            )));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("feature_noise {} must be >= 0", self.feature_noise)));
        }
        Ok(())
    }
}

/// Samples the graph. Node `i` belongs to block `i / nodes_per_block`; each
/// pair is an edge with probability `p_in` within a block and `p_out` across.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<Graph> {
    cfg.validate()?;
    let n = cfg.blocks * cfg.nodes_per_block;
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.nodes_per_block).collect();

    let mut edge_rng = seed::derived_rng(cfg.seed, "sbm-edges", 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { cfg.p_in } else { cfg.p_out };
            if edge_rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let mut feat_rng = seed::derived_rng(cfg.seed, "sbm-features", 0);
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    for (i, &block) in labels.iter().enumerate() {
        for (c, x) in features.row_mut(i).iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut feat_rng);
            *x = f64::from(u8::from(c == block)) + cfg.feature_noise * noise;
        }
    }
    Graph::new(&edges, features, Some(labels))
}
