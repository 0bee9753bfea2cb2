use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::linalg::affine_fit;
use crate::regressors::Model;
use crate::rng::rng;
use crate::Matrix;

/// Kernel-weighted linear surrogate fitted on `samples` Gaussian draws
/// around `x` with per-feature training variances. Distances are scaled by
/// the training standard deviations; the kernel is
/// `sqrt(exp(-dist^2 / width^2))` with `width = 0.75 sqrt(d)` by default.
/// Returns the slopes and whether the weighted system was rank deficient.
pub fn lime_local(
    model: &dyn Model,
    train: &Matrix,
    x: &[f64],
    samples: usize,
    width: Option<f64>,
    seed: u64,
) -> (Vec<f64>, bool) {
    let d = x.len();
    let sd: Vec<f64> = train.column_variances().iter().map(|v| libm::sqrt(*v)).collect();
    let width = width.unwrap_or(0.75 * libm::sqrt(d as f64));
    let mut r = rng(seed);
    let mut z = Matrix::zeros(samples, d);
    let mut w = Vec::with_capacity(samples);
    for i in 0..samples {
        let row = z.row_mut(i);
        let mut dist2 = 0.0;
        for j in 0..d {
            let e: f64 = StandardNormal.sample(&mut r);
            row[j] = x[j] + sd[j] * e;
            if sd[j] > 0.0 {
                dist2 += e * e;
            }
        }
        w.push(libm::sqrt(libm::exp(-dist2 / (width * width))));
    }
    let fz = model.predict_batch(&z);
    match affine_fit(&z, &fz, Some(&w)) {
        Ok(fit) => (fit.coef, fit.rank_deficient),
        Err(_) => (alloc::vec![f64::NAN; d], true),
    }
}
