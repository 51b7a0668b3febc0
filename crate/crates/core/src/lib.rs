//! Mirror-descent search: black-box optimization over sampling
//! distributions by mirror descent on the simplex, its Nesterov-style
//! accelerated variant, Gaussian mean-update approximations of both, and a
//! path-integral policy-improvement baseline, benchmarked on DMP-driven
//! via-point tasks.
//!
//! The crate is organized around the update kernels ([`mirror`]), the
//! divergence generators behind them ([`divergence`]), the episode-level
//! optimizers ([`search`], [`dp`]), the baseline ([`pi2`]), the benchmark
//! environments ([`dmp`], [`tasks`]) and the experiment harness
//! ([`harness`]).
//!
//! Rollout batches are evaluated in parallel when the `parallel` feature
//! (on by default) is enabled; results are reduced in rollout order and
//! every random draw comes from a counter-derived substream, so outputs
//! are byte-identical with and without parallelism.

pub mod divergence;
pub mod dmp;
pub mod dp;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod harness;
pub mod mirror;
pub mod pi2;
pub mod rng;
pub mod search;
pub mod simplex;
pub mod tasks;

pub use error::{MdsError, Result};
