use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::regressors::Model;
use crate::rng::rng;
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MorrisResult {
    /// Mean elementary effect per feature.
    pub mu: Vec<f64>,
    /// Mean absolute elementary effect per feature.
    pub mu_star: Vec<f64>,
}

/// Elementary effects along one-at-a-time trajectories on a `levels`-level
/// grid over the training bounds. Steps are `levels / (2 (levels - 1))` of
/// each feature's range and flip direction where they would leave it.
pub fn morris_global(model: &dyn Model, x: &Matrix, trajectories: usize, levels: usize, seed: u64) -> MorrisResult {
    let d = x.ncols();
    let bounds = x.column_bounds();
    let p = levels as f64;
    let frac = p / (2.0 * (p - 1.0));
    let mut r = rng(seed);
    let mut mu = vec![0.0; d];
    let mut mu_star = vec![0.0; d];
    let mut counts = vec![0usize; d];
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..trajectories {
        let start = x.row(r.random_range(0..x.nrows()));
        let mut cur: Vec<f64> = start
            .iter()
            .zip(&bounds)
            .map(|(&v, &(lo, hi))| {
                if hi > lo {
                    let level = libm::round((v - lo) / (hi - lo) * (p - 1.0));
                    lo + level / (p - 1.0) * (hi - lo)
                } else {
                    lo
                }
            })
            .collect();
        let mut f_cur = model.predict(&cur);
        order.shuffle(&mut r);
        for &j in &order {
            let (lo, hi) = bounds[j];
            let width = hi - lo;
            if !(width > 0.0) {
                counts[j] += 1;
                continue;
            }
            let mut delta = frac * width;
            if cur[j] + delta > hi + 1e-9 * width {
                delta = -delta;
            }
            cur[j] += delta;
            let f_next = model.predict(&cur);
            let ee = (f_next - f_cur) / delta;
            mu[j] += ee;
            mu_star[j] += ee.abs();
            counts[j] += 1;
            f_cur = f_next;
        }
    }
    for j in 0..d {
        mu[j] /= counts[j] as f64;
        mu_star[j] /= counts[j] as f64;
    }
    MorrisResult { mu, mu_star }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::regressors::{FittedModel, ModelKind, ModelMeta};

    fn grid() -> Matrix {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.25 - 3.0, libm::sin(i as f64) * 2.0]).collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn linear_model_gives_coefficients() {
        let m = FittedModel::from_expr(ModelKind::Truth, 2, parse("3*a + 2*b", &["a", "b"]).unwrap(), ModelMeta::default()).unwrap();
        let r = morris_global(&m, &grid(), 20, 8, 1);
        assert!((r.mu[0] - 3.0).abs() < 1e-12 && (r.mu[1] - 2.0).abs() < 1e-12);
        let m = FittedModel::from_expr(ModelKind::Truth, 2, parse("-3*a", &["a", "b"]).unwrap(), ModelMeta::default()).unwrap();
        let r = morris_global(&m, &grid(), 20, 8, 1);
        assert!((r.mu[0] + 3.0).abs() < 1e-12 && (r.mu_star[0] - 3.0).abs() < 1e-12);
        assert_eq!(r.mu[1], 0.0);
    }

    #[test]
    fn single_step_matches_difference_quotient() {
        let m = FittedModel::from_expr(ModelKind::Truth, 1, parse("x^2", &["x"]).unwrap(), ModelMeta::default()).unwrap();
        let x = Matrix::from_vec(2, 1, vec![0.0, 7.0]);
        let r = morris_global(&m, &x, 1, 8, 0);
        let delta = 8.0 / 14.0 * 7.0;
        let ee = |s: f64, dl: f64| ((s + dl) * (s + dl) - s * s) / dl;
        assert!(r.mu[0] == ee(0.0, delta) || r.mu[0] == ee(7.0, -delta));
    }
}
