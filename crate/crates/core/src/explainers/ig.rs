use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::regressors::Model;
use crate::Matrix;

/// Reference point of the integration path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Per-feature training mean.
    Mean,
    Zero,
    Point(Vec<f64>),
}

impl Baseline {
    pub fn resolve(&self, x: &Matrix) -> Vec<f64> {
        match self {
            Baseline::Mean => x.column_means(),
            Baseline::Zero => vec![0.0; x.ncols()],
            Baseline::Point(p) => p.clone(),
        }
    }
}

/// Gradient from the model, or central differences with
/// `h = 1e-6 * max(1, |x_j|)`.
fn gradient(model: &dyn Model, x: &[f64]) -> Vec<f64> {
    if let Some(g) = model.gradient(x) {
        return g;
    }
    let mut z = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1.0);
            z[j] = x[j] + h;
            let up = model.predict(&z);
            z[j] = x[j] - h;
            let down = model.predict(&z);
            z[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Integrated gradients along the straight path from `baseline` to `x`,
/// with the trapezoidal rule on `m` equally spaced points.
pub fn ig_local(model: &dyn Model, baseline: &[f64], x: &[f64], m: usize) -> Vec<f64> {
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut z = vec![0.0; d];
    for k in 0..m {
        let a = k as f64 / (m - 1) as f64;
        for j in 0..d {
            z[j] = baseline[j] + a * (x[j] - baseline[j]);
        }
        let w = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
        for (s, g) in acc.iter_mut().zip(gradient(model, &z)) {
            *s += w * g;
        }
    }
    (0..d).map(|j| (x[j] - baseline[j]) * acc[j] / (m - 1) as f64).collect()
}
