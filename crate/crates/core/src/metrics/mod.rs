//! Accuracy metrics, perturbation neighborhoods, robustness measures and
//! explanation quality against ground truth.

mod accuracy;
mod neighborhood;
mod quality;
mod robustness;

pub use accuracy::{mae, mse, nmse_pred, r2, Score};
pub use neighborhood::{neighborhood, neighborhood_with_cov, Neighborhood, DEFAULT_LAMBDA, DEFAULT_NEIGHBORS};
pub use quality::{cosine_quality, nmse_quality, truth_explanation, truth_model, QualityScore};
pub use robustness::{infidelity, jaccard_stability, robustness, stability, top_k, Robustness};
