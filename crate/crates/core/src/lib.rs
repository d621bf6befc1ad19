//! Multi-objective architecture search over a multi-branch, multi-resolution
//! space of lightweight convolutions and memory-efficient self-attention.
//!
//! The crate is organised bottom-up:
//!
//! - [`search_space`]: grid topology, genome encoding, constraints, sampler, IR
//! - [`cost_model`]: analytic MACs / parameters / activation memory, latency
//!   estimates and the memory budget check
//! - [`evaluator`]: genome → objectives, either the analytic proxy or an
//!   external worker process speaking a line-delimited JSON protocol
//! - [`nsga2`]: constrained NSGA-II with branch-level crossover and
//!   categorical mutation, plus the front archive
//! - [`baselines`]: random sampling, single-edit local search, front
//!   selection helpers and rank correlation
//! - [`export`]: front/scatter export files and run manifests
//! - [`cli`]: the `hybrid-nas` command line

pub mod baselines;
pub mod cli;
pub mod cost_model;
pub mod evaluator;
pub mod export;
pub mod nsga2;
pub mod rng;
pub mod search_space;
