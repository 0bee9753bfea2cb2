use alloc::vec::Vec;

use crate::linalg::affine_fit;
use crate::regressors::Model;
use crate::Matrix;

/// Indices of the `k` training rows nearest to `x`, measured on the
/// features selected by `mask` (all when `None`), ties by row index.
pub(crate) fn nearest(train: &Matrix, x: &[f64], mask: Option<&[bool]>, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = train
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let s = r
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(j, _)| mask.is_none_or(|m| m[*j]))
                .map(|(_, (a, b))| (a - b) * (a - b))
                .sum::<f64>();
            (s, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Slopes of a least-squares fit to the model's predictions on the `k`
/// nearest training rows. Returns the slopes and whether the fit was
/// degenerate (fewer than `d + 1` rows or rank deficient).
pub fn ela_local(model: &dyn Model, train: &Matrix, x: &[f64], k: usize) -> (Vec<f64>, bool) {
    let d = x.len();
    let idx = nearest(train, x, model.feature_mask(), k.max(1));
    let z = train.select_rows(&idx);
    let fz = model.predict_batch(&z);
    match affine_fit(&z, &fz, None) {
        Ok(fit) => (fit.coef, fit.rank_deficient || idx.len() < d + 1),
        Err(_) => (alloc::vec![f64::NAN; d], true),
    }
}
