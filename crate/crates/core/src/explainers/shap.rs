use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::shapley_from_table;
use crate::regressors::Model;
use crate::rng::{rng, seed_for_point};
use crate::Matrix;

/// `f` at `x` with the features outside each coalition set to `fill`, for
/// all `2^d` coalitions (bit `j` set when feature `j` keeps its value).
pub fn coalition_values(model: &dyn Model, fill: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let count = 1usize << d;
    let mut z = Matrix::zeros(count, d);
    for s in 0..count {
        let row = z.row_mut(s);
        for j in 0..d {
            row[j] = if s >> j & 1 == 1 { x[j] } else { fill[j] };
        }
    }
    model.predict_batch(&z)
}

/// Shapley values with mean imputation of absent features: exact for
/// `d <= cutoff`, otherwise averaged over `samples` random permutations.
pub fn shap_local(model: &dyn Model, means: &[f64], x: &[f64], cutoff: usize, samples: usize, seed: u64) -> Vec<f64> {
    let d = x.len();
    if d <= cutoff {
        return shapley_from_table(&coalition_values(model, means, x), d);
    }
    let mut r = rng(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut z = Matrix::zeros(samples * (d + 1), d);
    let mut orders = Vec::with_capacity(samples);
    for s in 0..samples {
        perm.shuffle(&mut r);
        let mut cur = means.to_vec();
        z.row_mut(s * (d + 1)).copy_from_slice(&cur);
        for (k, &j) in perm.iter().enumerate() {
            cur[j] = x[j];
            z.row_mut(s * (d + 1) + k + 1).copy_from_slice(&cur);
        }
        orders.push(perm.clone());
    }
    let v = model.predict_batch(&z);
    let mut phi = vec![0.0; d];
    for (s, order) in orders.iter().enumerate() {
        for (k, &j) in order.iter().enumerate() {
            phi[j] += v[s * (d + 1) + k + 1] - v[s * (d + 1) + k];
        }
    }
    phi.iter_mut().for_each(|p| *p /= samples as f64);
    phi
}

/// Mean absolute local SHAP value over the rows of `x`.
pub fn shap_global(model: &dyn Model, x: &Matrix, cutoff: usize, samples: usize, seed: u64) -> Vec<f64> {
    let means = x.column_means();
    let mut acc = vec![0.0; x.ncols()];
    for row in x.rows() {
        let psi = shap_local(model, &means, row, cutoff, samples, seed_for_point(seed, row));
        acc.iter_mut().zip(psi).for_each(|(a, p)| *a += p.abs());
    }
    acc.iter_mut().for_each(|a| *a /= x.nrows() as f64);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::regressors::{FittedModel, ModelKind, ModelMeta};

    fn truth(src: &str, d: usize) -> FittedModel {
        let names: Vec<alloc::string::String> = (0..d).map(|i| alloc::format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        FittedModel::from_expr(ModelKind::Truth, d, parse(src, &refs).unwrap(), ModelMeta::default()).unwrap()
    }

    #[test]
    fn linear_closed_form() {
        let m = truth("3*x0 + 2*x1", 2);
        assert_eq!(shap_local(&m, &[0.0, 0.0], &[1.0, 1.0], 10, 1, 0), vec![3.0, 2.0]);
    }

    #[test]
    fn efficiency_symmetry_and_dummy() {
        let m = truth("x0 * x1 + sin(x2) + x0^2", 4);
        let means = [0.5, -0.2, 1.0, 3.0];
        let x = [1.5, 2.0, -0.7, 9.0];
        let psi = shap_local(&m, &means, &x, 10, 1, 0);
        let total: f64 = psi.iter().sum();
        assert!((total - (m.predict(&x) - m.predict(&means))).abs() < 1e-12);
        assert_eq!(psi[3], 0.0);
        let m = truth("x0 + x1", 2);
        let psi = shap_local(&m, &[0.3, 0.3], &[2.0, 2.0], 10, 1, 0);
        assert_eq!(psi[0], psi[1]);
    }

    #[test]
    fn sampled_mode_is_efficient_and_close() {
        let m = truth("x0 * x1 + x2", 3);
        let means = [0.0, 0.0, 0.0];
        let x = [1.0, 2.0, 3.0];
        let exact = shap_local(&m, &means, &x, 10, 1, 0);
        let mc = shap_local(&m, &means, &x, 0, 2000, 5);
        assert!((mc.iter().sum::<f64>() - 5.0).abs() < 1e-9);
        for (a, b) in exact.iter().zip(&mc) {
            assert!((a - b).abs() < 0.1);
        }
    }

    #[test]
    fn global_is_mean_absolute_local() {
        let m = truth("x0 - 2*x1", 2);
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 2.0], vec![3.0, 1.0]]);
        let g = shap_global(&m, &x, 10, 1, 0);
        let means = x.column_means();
        let mut oracle = [0.0; 2];
        for row in x.rows() {
            for (o, p) in oracle.iter_mut().zip(shap_local(&m, &means, row, 10, 1, 0)) {
                *o += p.abs() / 3.0;
            }
        }
        assert!((g[0] - oracle[0]).abs() < 1e-15 && (g[1] - oracle[1]).abs() < 1e-15);
    }
}
