//! Pointbased tilt-stability analysis for smooth nonlinear programs.
//!
//! Given `min phi(x)` subject to `q_i(x) = 0 (i in E)`, `q_i(x) <= 0 (i in I)`
//! and a candidate point, the crate
//!
//! - evaluates symbolic first/second-order data ([`model`]),
//! - checks LICQ, MFCQ, CRCQ and RCRCQ ([`cq`]),
//! - describes the Lagrange multiplier polyhedron ([`multipliers`]),
//! - decides tilt stability from the Lagrangian Hessian reduced to the
//!   subspace `{w : <grad q_i, w> = 0, i in E ∪ I+}` and reports the exact
//!   tilt bound `1 / lambda_min` ([`tilt`]),
//! - cross-checks the verdict against brute-force tilted minimization
//!   ([`oracle`]),
//! - and assembles everything into a serializable record ([`report`]).
//!
//! The linear algebra in [`numerics`] is generic over [`Scalar`]; the
//! analysis layer is written against the `f64` aliases below.

pub mod cq;
pub mod fixtures;
pub mod model;
pub mod multipliers;
pub mod numerics;
pub mod oracle;
pub mod report;
mod scalar;
pub mod tilt;

pub use scalar::Scalar;

/// Dense `f64` matrix used throughout the analysis layer.
pub type Matrix = numerics::DenseMatrix<f64>;
/// Real vector.
pub type Vector = Vec<f64>;
/// `f64` linear program.
pub type LinearProgram = numerics::LinearProgram<f64>;
/// `f64` LP outcome.
pub type LpResult = numerics::LpResult<f64>;
