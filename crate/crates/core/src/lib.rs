//! Multiscale flatness analysis for sampled subsets of ℝⁿ.
//!
//! The crate computes scale-normalized flatness quantities on finite point
//! clouds — Reifenberg θ-numbers (two-sided Hausdorff distance to the best
//! affine m-plane patch) and Jones β-numbers (one-sided sup distance) — and
//! builds the multiscale structures on top of them:
//!
//! - [`grassmann`]: m-planes, projections, and the operator-norm angle metric;
//! - [`pointsets`]: point clouds, Hausdorff distances, plane patch nets, and
//!   generators for the standard example sets;
//! - [`flatness`]: θ/β optimization over G(n,m) and multiscale profiles;
//! - [`multiscale`]: radius ladders and the sum/integral sufficiency
//!   conditions with convergence-vs-divergence fits;
//! - [`rpc`]: radius-ladder certificates (per-point approximating planes,
//!   δ/ε sequences, limit planes) with checkers and estimate verifiers;
//! - [`graphify`]: extraction of local Lipschitz/C¹ graph charts with
//!   derivative and continuity diagnostics;
//! - [`param`]: the iterated mollified-projection parameterization mapping a
//!   plane disk into the sampled set, with per-level traces.
//!
//! Everything is deterministic per seed; randomized routines take explicit
//! seeds and parallel reductions are order-stable.

pub mod error;
pub mod grassmann;
pub mod pointsets;
pub mod flatness;
pub mod multiscale;
pub mod rpc;
pub mod graphify;
pub mod param;

pub use error::{Error, Result};
