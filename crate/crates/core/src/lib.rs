//! Graph-learned transforms for block residual coding.
//!
//! The crate learns generalized graph Laplacians (GGLs) from residual
//! statistics, turns them into graph-based transforms, and measures those
//! transforms with a small transform-coding and rate-distortion harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod coding;
pub mod dataset;
pub mod eagbt;
pub mod error;
pub mod gmrf;
pub mod graph;
pub mod learn;
pub mod matrix;
pub mod transforms;

pub use error::{Error, Result};
