//! Deflated restarted Lanczos (Lan-DR) for symmetric and Hermitian problems.
//!
//! Lan-DR solves `Ax = b` by a Galerkin projection over a restarted Krylov
//! space while it carries `k` Ritz vectors from one cycle to the next, so the
//! same run produces the solution and a set of eigenpairs. The eigenvector
//! information is packaged as a [`DeflationSpace`] and reused by deflated CG
//! ([`dcg::d_cg`]) and deflated Minres ([`minresdr::d_minres`]) for further
//! right-hand sides. Minres-DR ([`minresdr::minres_dr`]) is the minimum
//! residual variant with harmonic Ritz restarting for indefinite problems, and
//! [`blockcg::block_cg`] is the block baseline.
//!
//! Every solver is generic over [`Scalar`], which is implemented for `f64`
//! and `Complex64`. Matrix-vector products and length-n vector operations are
//! tallied in [`counters`], which is how the harness compares costs.

pub mod blockcg;
pub mod counters;
pub mod dcg;
pub mod error;
pub mod harness;
pub mod history;
pub mod kernels;
pub mod landr;
pub mod mm;
pub mod minresdr;
pub mod operator;
pub mod reorth;
pub mod rng;
pub mod scalar;
pub mod small;

pub use error::{Error, Result};
pub use history::{ConvergenceHistory, HistoryRow, SolveOutput, Status};
pub use kernels::Block;
pub use landr::{lan_dr, DeflationSpace, LanDrConfig, LanDrOutput, Target};
pub use operator::{CsrMatrix, Diagonal, LinearOperator};
pub use reorth::ReorthPolicy;
pub use scalar::Scalar;
