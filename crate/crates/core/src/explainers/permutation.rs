use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::metrics::r2;
use crate::regressors::Model;
use crate::rng::rng;
use crate::Matrix;

/// Drop in R² when each column is shuffled, averaged over `repeats`
/// shuffles. Each repeat contributes `s - s_k`, so a feature the model
/// ignores scores exactly 0.
pub fn permutation_global(model: &dyn Model, x: &Matrix, y: &[f64], repeats: usize, seed: u64) -> Vec<f64> {
    let base = r2(&model.predict_batch(x), y).value;
    let mut r = rng(seed);
    let d = x.ncols();
    let mut out = vec![0.0; d];
    let mut z = x.clone();
    let mut col: Vec<f64> = Vec::with_capacity(x.nrows());
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for _ in 0..repeats {
            col.clear();
            col.extend(x.rows().map(|row| row[j]));
            col.shuffle(&mut r);
            for (i, v) in col.iter().enumerate() {
                z[(i, j)] = *v;
            }
            acc += base - r2(&model.predict_batch(&z), y).value;
        }
        for i in 0..x.nrows() {
            z[(i, j)] = x[(i, j)];
        }
        *o = acc / repeats as f64;
    }
    out
}
