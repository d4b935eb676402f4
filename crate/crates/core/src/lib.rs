//! Pairwise-competition opinion dynamics: particle simulation, graph-limit
//! solvers, Riemann-sum embeddings, Wasserstein-1 distances and the study
//! harness behind the `graphlimit` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod error;
pub mod graph;
pub mod harness;
pub mod meanfield;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
