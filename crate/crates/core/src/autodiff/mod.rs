//! Dense reverse-mode differentiation.
//!
//! A [`Tape`] is rebuilt for every evaluation: operations are recorded as
//! they run and [`Tape::backward`] replays them in reverse. Values are `f64`
//! throughout and every forward op rejects non-finite results.

mod gradcheck;
mod matrix;
mod sparse;
mod tape;

pub use gradcheck::{finite_diff_check, relative_error, GradCheck, RELATIVE_FLOOR};
pub use matrix::{dot, Matrix};
pub use sparse::SparseMatrix;
pub use tape::{Elementwise, Gradients, OpKind, Reduction, Tape, Var};

/// Cosine similarity guard for zero rows.
pub const COSINE_EPS: f64 = 1e-12;
