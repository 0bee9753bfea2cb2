use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::psd_factor;
use crate::rng::rng;
use crate::Matrix;

/// Default number of neighbors per evaluation point.
pub const DEFAULT_NEIGHBORS: usize = 30;
/// Default neighborhood scale.
pub const DEFAULT_LAMBDA: f64 = 0.001;

/// Draws from `N(center, lambda * covariance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub center: Vec<f64>,
    pub points: Matrix,
    pub lambda: f64,
    /// Training covariance.
    pub covariance: Matrix,
}

/// `m` Gaussian neighbors of `x` with covariance `lambda * cov(train)`.
pub fn neighborhood(x: &[f64], train: &Matrix, lambda: f64, m: usize, seed: u64) -> Neighborhood {
    neighborhood_with_cov(x, train.covariance(), lambda, m, seed)
}

/// [`neighborhood`] with a precomputed training covariance.
pub fn neighborhood_with_cov(x: &[f64], covariance: Matrix, lambda: f64, m: usize, seed: u64) -> Neighborhood {
    let d = x.len();
    let mut s = covariance.clone();
    for i in 0..d {
        for j in 0..d {
            s[(i, j)] *= lambda;
        }
    }
    let (l, clipped) = psd_factor(&s);
    if clipped < -1e-8 {
        log::warn!("neighborhood covariance clipped an eigenvalue of {clipped}");
    }
    let mut r = rng(seed);
    let mut points = Matrix::zeros(m, d);
    let mut z = alloc::vec![0.0; d];
    for i in 0..m {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        let row = points.row_mut(i);
        for a in 0..d {
            row[a] = x[a] + (0..d).map(|k| l[(a, k)] * z[k]).sum::<f64>();
        }
    }
    Neighborhood { center: x.to_vec(), points, lambda, covariance }
}
