//! Small dense linear algebra: tolerance-aware rank, orthonormal null spaces,
//! symmetric eigendecomposition and a two-phase simplex LP solver.
//!
//! Every kernel is generic over [`Scalar`](crate::Scalar); the analysis layer
//! uses the `f64` aliases exported at the crate root.

mod eig;
mod lp;
mod matrix;
mod svd;

pub use eig::{sym_eig, sym_eig_min, SymEigen};
pub use lp::{solve_lp, LinearProgram, LpResult, Sense, VarBound};
pub use matrix::DenseMatrix;
pub use svd::{lstsq, null_space_orthonormal, rank, svd, Svd};
pub(crate) use matrix::{dot, norm2};

use thiserror::Error;

/// Default relative rank tolerance.
pub const DEFAULT_TOL_RANK: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
