//! Graph self-supervised learning with balanced smoothness.
//!
//! A two-layer GCN encoder is trained to reconstruct masked edges (or masked
//! node features) while three extra terms steer how smooth the embeddings are
//! across edges: a neighbor loss pulls each node toward its neighborhood
//! mean, a minimal loss ties the masked-view encoding to the target-view
//! encoding, and a divergence loss pushes neighbors apart once their cosine
//! similarity exceeds a margin.

pub mod autodiff;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod losses;
pub mod model;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
