use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{masked_predictions, shapley_from_table};
use crate::regressors::Model;
use crate::rng::rng;
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SageResult {
    /// Shapley values of the gain in mutual information over the empty
    /// coalition.
    pub values: Vec<f64>,
    /// The same values under the opposite sign convention.
    pub printed_sign: Vec<f64>,
}

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    if !(width > 0.0) || !v.is_finite() {
        return 0;
    }
    (libm::floor((v - lo) / width) as isize).clamp(0, bins as isize - 1) as usize
}

/// Finite range of `v`, collapsed to a point when the spread is round-off.
fn range(v: &[f64]) -> (f64, f64) {
    let (lo, hi) =
        v.iter().filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        (lo, lo)
    } else {
        (lo, hi)
    }
}

/// Mutual information (nats) between two samples from an equal-width
/// `bins x bins` histogram.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let (alo, ahi) = range(a);
    let (blo, bhi) = range(b);
    let aw = (ahi - alo) / bins as f64;
    let bw = (bhi - blo) / bins as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&u, &v) in a.iter().zip(b) {
        let i = bin_of(u, alo, aw, bins);
        let j = bin_of(v, blo, bw, bins);
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pij = c as f64 / nf;
                mi += pij * libm::log(pij * nf * nf / (pa[i] as f64 * pb[j] as f64));
            }
        }
    }
    mi.max(0.0)
}

/// Shapley attribution of predictive power, measured as the mutual
/// information between mean-imputed predictions and `y`.
pub fn sage_global(
    model: &dyn Model,
    x: &Matrix,
    y: &[f64],
    cutoff: usize,
    samples: usize,
    bins: usize,
    seed: u64,
) -> SageResult {
    let d = x.ncols();
    let means = x.column_means();
    let value = |keep: &[bool]| mutual_information(&masked_predictions(model, x, &means, keep), y, bins);
    let empty = value(&vec![false; d]);
    let values = if d <= cutoff {
        let table: Vec<f64> = (0..1usize << d)
            .map(|s| {
                let keep: Vec<bool> = (0..d).map(|j| s >> j & 1 == 1).collect();
                value(&keep) - empty
            })
            .collect();
        shapley_from_table(&table, d)
    } else {
        let mut r = rng(seed);
        let mut perm: Vec<usize> = (0..d).collect();
        let mut phi = vec![0.0; d];
        for _ in 0..samples {
            perm.shuffle(&mut r);
            let mut keep = vec![false; d];
            let mut prev = 0.0;
            for &j in &perm {
                keep[j] = true;
                let cur = value(&keep) - empty;
                phi[j] += cur - prev;
                prev = cur;
            }
        }
        phi.iter_mut().for_each(|p| *p /= samples as f64);
        phi
    };
    let printed_sign = values.iter().map(|v| -v).collect();
    SageResult { values, printed_sign }
}
