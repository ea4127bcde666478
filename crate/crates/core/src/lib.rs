//! Dynamic probabilistic matrix factorization for paired-score data.

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod latent;
pub mod likelihood;
pub mod prediction;
pub mod samplers;

pub use error::{DpmfError, Result};
