use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_data, fit, HyperGrid, HyperParams, Model, ModelKind, RegressorError};
use crate::metrics::r2;
use crate::rng::{derive_seed, rng};
use crate::Matrix;

/// Cross-validation outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hyper: HyperParams,
    /// Validation R² per fold; `None` where the fit failed or was not finite.
    pub fold_r2: Vec<Option<f64>>,
    /// `None` when any fold failed, or when the grid has a single cell and
    /// no cross-validation was run.
    pub mean_r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: HyperParams,
    pub best_index: usize,
    pub rows: Vec<CvRow>,
}

/// Shuffled partition of `0..n` into `k` validation folds of near-equal size.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    folds
}

/// Exhaustive search over `grid` scored by mean 3-fold validation R².
/// Ties keep the earliest cell.
pub fn grid_search(
    kind: ModelKind,
    grid: &HyperGrid,
    x: &Matrix,
    y: &[f64],
    seed: u64,
) -> Result<GridResult, RegressorError> {
    check_data(x, y)?;
    let cells = grid.cells();
    if cells.len() == 1 {
        let row = CvRow { hyper: cells[0].clone(), fold_r2: Vec::new(), mean_r2: None };
        return Ok(GridResult { best: cells[0].clone(), best_index: 0, rows: alloc::vec![row] });
    }
    let n = y.len();
    if n < 3 {
        return Err(RegressorError::Empty);
    }
    let folds = kfold_indices(n, 3, derive_seed(seed, &["cv-split"]));
    let splits: Vec<(Matrix, Vec<f64>, Matrix, Vec<f64>)> = folds
        .iter()
        .map(|val| {
            let train: Vec<usize> = (0..n).filter(|i| val.binary_search(i).is_err()).collect();
            (
                x.select_rows(&train),
                train.iter().map(|&i| y[i]).collect(),
                x.select_rows(val),
                val.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, f64)> = None;
    for (c, hyper) in cells.iter().enumerate() {
        let mut fold_r2 = Vec::with_capacity(3);
        for (f, (xt, yt, xv, yv)) in splits.iter().enumerate() {
            let s = derive_seed(seed, &["cv", &format!("{f}")]);
            let score = fit(kind, xt, yt, hyper, s)
                .ok()
                .map(|m| r2(&m.predict_batch(xv), yv).value)
                .filter(|v| v.is_finite());
            fold_r2.push(score);
        }
        let mean_r2 = fold_r2.iter().copied().sum::<Option<f64>>().map(|s| s / 3.0);
        if let Some(m) = mean_r2 {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((c, m));
            }
        }
        rows.push(CvRow { hyper: hyper.clone(), fold_r2, mean_r2 });
    }
    let best_index = best.map_or(0, |(c, _)| c);
    Ok(GridResult { best: cells[best_index].clone(), best_index, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_indices() {
        let f = kfold_indices(10, 3, 1);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), alloc::vec![4, 3, 3]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn knn_selection_is_argmax_of_table() {
        let xs: Vec<f64> = (0..90).map(|i| i as f64 / 10.0).collect();
        let x = Matrix::from_vec(90, 1, xs.clone());
        let g = ModelKind::Knn.default_grid();
        let res = grid_search(ModelKind::Knn, &g, &x, &xs, 5).unwrap();
        let k = res.best.get("n_neighbors").unwrap();
        assert!(g.params[0].1.contains(&k));
        let best = res.rows[res.best_index].mean_r2.unwrap();
        assert!(res.rows.iter().all(|r| r.mean_r2.is_none_or(|m| m <= best)));
    }

    #[test]
    fn single_cell_is_returned() {
        let x = Matrix::from_vec(4, 1, alloc::vec![0.0, 1.0, 2.0, 3.0]);
        let res = grid_search(ModelKind::Linear, &HyperGrid::default(), &x, &[0.0, 1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(res.best, HyperParams::new());
    }
}
