use alloc::vec;
use alloc::vec::Vec;

use super::{ExplainError, ExplainerKind};
use crate::regressors::Model;
use crate::Matrix;

/// Gradient of the model's symbolic form at `x`.
pub fn pe_local(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>, ExplainError> {
    model.gradient(x).ok_or(ExplainError::NotSymbolic(ExplainerKind::Pe))
}

/// Mean absolute partial effect over the rows of `x`.
pub fn pe_global(model: &dyn Model, x: &Matrix) -> Result<Vec<f64>, ExplainError> {
    let mut acc = vec![0.0; x.ncols()];
    for row in x.rows() {
        for (a, g) in acc.iter_mut().zip(pe_local(model, row)?) {
            *a += g.abs();
        }
    }
    let n = x.nrows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}
