use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_data, FittedModel, ModelBody, ModelKind, ModelMeta, RegressorError};
use crate::Matrix;

/// Brute-force k-nearest-neighbors regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub k: usize,
}

impl Knn {
    /// Indices of the `k` nearest rows by Euclidean distance, ties broken
    /// by row index, in ascending (distance, index) order.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let nb = self.neighbors(q);
        nb.iter().map(|&i| self.y[i]).sum::<f64>() / nb.len() as f64
    }
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if k == 0 || k > y.len() {
        return Err(RegressorError::Hyper { name: "n_neighbors".into(), value: k as f64 });
    }
    let body = ModelBody::Knn(Knn { x: x.clone(), y: y.to_vec(), k });
    Ok(FittedModel::from_body(ModelKind::Knn, x.ncols(), body, ModelMeta::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::Model;
    use alloc::vec;

    #[test]
    fn k1_returns_own_target_and_kn_returns_mean() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]);
        let y = [1.0, 2.0, 6.0];
        let m = fit_knn(&x, &y, 1).unwrap();
        assert_eq!(m.predict(&[1.0]), 2.0);
        let m = fit_knn(&x, &y, 3).unwrap();
        assert_eq!(m.predict(&[100.0]), 3.0);
        assert!(fit_knn(&x, &y, 4).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0], vec![1.0]]);
        let knn = Knn { x, y: vec![10.0, 20.0, 30.0], k: 1 };
        assert_eq!(knn.neighbors(&[0.0]), vec![0]);
        let knn = Knn { k: 2, ..knn };
        assert_eq!(knn.neighbors(&[1.0]), vec![1, 2]);
    }
}
