//! Feature-distributed ridge regression with a single exchange of random
//! projections between workers.
//!
//! Each of `K` workers owns a block of raw features, publishes one random
//! projection of that block, and then solves a local ridge problem on its raw
//! features plus the projections received from everyone else. The coefficients
//! of the raw features are stitched back together into a vector in the
//! original feature space.
//!
//! Module map:
//!
//! - [`linalg`]: dense column-major matrices, Cholesky, symmetric eigensolvers,
//!   column standardization.
//! - [`projections`]: SRHT, sparse and dense random projections.
//! - [`solvers`]: closed-form and SDCA ridge solvers, min-norm least squares.
//! - [`engine`]: feature partitioning and the threaded one-shot exchange.
//! - [`datagen`]: block-correlated Gaussian regression data and its on-disk format.
//! - [`baselines`]: single-machine comparison estimators.
//! - [`theory`]: computable checks of the approximation and risk bounds.

pub mod baselines;
pub mod datagen;
mod duration_secs;
pub mod engine;
mod error;
pub mod linalg;
pub mod projections;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
