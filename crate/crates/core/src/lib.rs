//! Diversity-aware recommendation toolkit: an alternating-least-squares
//! matrix-factorization recommender, a normalized intra-list latent distance
//! (nILLD) diversity measure with exact and greedy max-dispersion
//! normalizers, a swap-based post-processing pass that enforces a per-user
//! diversity floor, and an experiment harness reporting the
//! diversity-vs-relevance trade-off as CSV.
//!
//! Everything is deterministic given explicit seeds: parsing, splitting,
//! training, ranking, post-processing, and report serialization all produce
//! identical bytes across runs on the same inputs.

pub mod dataset;
pub mod diversity;
pub mod error;
pub mod factorization;
pub mod harness;
pub mod postprocess;
pub mod ranking;
pub mod synth;

pub use error::{Error, Result};

/// Re-exported so downstream crates can build factor matrices against the
/// exact linear-algebra version this crate was compiled with.
pub use nalgebra;
