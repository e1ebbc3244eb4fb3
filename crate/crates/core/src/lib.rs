//! Confidence-weighted positive sample pairs for implicit collaborative
//! filtering trained with negative sampling.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole
//! algorithmic path: interaction datasets and splits, degree-normalized
//! sparse adjacency with a randomized truncated SVD, adaptive top-K
//! neighbor graphs fused with the observed graph, replication-based
//! positive pair tables with activity-aware user weights, negative
//! samplers, a matrix-factorization BPR model with sparse Adam, and the
//! training / evaluation loop. File formats and the command line live in
//! the companion `psp-ns` crate.
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod psp;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod train_eval;

pub use error::{Error, Result};
