//! Core algorithms for benchmarking feature-importance explanations of
//! symbolic and classical regression models.
//!
//! The crate is `no_std` and only needs an allocator. It contains:
//!
//! - [`expr`]: expression trees, evaluation, symbolic differentiation,
//!   simplification, parsing and the interaction-transformation bridge;
//! - [`dataset`]: the ground-truth equation registry and the uniform, grid
//!   and Latin-hypercube samplers;
//! - [`regressors`]: seven regression trainers behind one fitted-model
//!   contract, plus grid search with 3-fold cross-validation;
//! - [`explainers`]: local and global feature-importance methods;
//! - [`metrics`]: prediction accuracy, perturbation neighborhoods,
//!   robustness measures and ground-truth explanation quality;
//! - [`stats`]: median/IQR summaries, Wilcoxon signed-rank, Holm correction
//!   and average ranks.
//!
//! File formats, timing, concurrency and the command line live in the
//! companion `exbench` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod explainers;
pub mod expr;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod regressors;
pub mod rng;
pub mod stats;

pub use matrix::Matrix;
