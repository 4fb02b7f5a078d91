//! Unsupervised feature selection by jointly learning an uncorrelated
//! projection, a spectral cluster-indicator matrix and an adaptive k-sparse
//! similarity graph.
//!
//! The crate is `no_std` and only needs an allocator. Matrices are
//! features-by-samples (`d × n`).

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod driver;
pub mod error;
pub mod eval;
pub mod fsolver;
pub mod graph;
pub mod matrix;
pub mod synthetic;
pub mod wsolver;

pub use driver::{run_agufs, run_agufs_with, AgufsConfig, AgufsOutput, FeatureRanking, IterationState, RunOptions, SolverTrace};
pub use error::{Error, Result, Warning};
pub use eval::{evaluate_selection, EvalReport};
pub use matrix::DenseMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
