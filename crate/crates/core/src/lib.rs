//! Passive and active Langevin samplers that recover a reward function from
//! the noisy gradients of agents optimizing it.
//!
//! Forward agents run stochastic gradient ascent on an unknown reward `R`
//! and emit the pairs `(θ_k, ∇r_k(θ_k))`. An inverse learner that has no
//! control over where those gradients were evaluated runs a kernel-weighted
//! Langevin recursion whose iterates are distributed as `exp(β R)`, so that
//! the log of their histogram reconstructs `R` up to an additive constant.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN. Matrix
// code indexes several arrays by the same loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod forward;
pub mod irl;
pub mod kernels;
pub mod problems;
pub mod rng;
pub mod tracking;
pub mod vector;

pub use error::{Error, Result};
pub use forward::{AgentPoolConfig, GradientOracle, InitDensity};
pub use irl::{run_sampler, SamplerConfig, Trajectory, Variant};
pub use kernels::{Kernel, KernelFamily};
pub use rng::RngStream;
pub use vector::{GradientSample, ParamVector};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
