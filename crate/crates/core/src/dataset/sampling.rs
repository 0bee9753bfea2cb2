use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{DatasetError, FeatureSpace};
use crate::rng::rng;
use crate::Matrix;

/// Largest Cartesian grid materialized by default.
pub const DEFAULT_GRID_CAP: usize = 100_000;

/// `n` i.i.d. rows, uniform within the bounds of `space`.
pub fn sample_uniform(space: &FeatureSpace, n: usize, seed: u64) -> Matrix {
    let d = space.dim();
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            let (lo, hi) = (space.lower[j], space.upper[j]);
            let u: f64 = r.random();
            data.push((lo + u * (hi - lo)).min(hi));
        }
    }
    Matrix::from_vec(n, d, data)
}

/// The endpoint-inclusive 1-D grid `start, start + step, ..., stop`.
pub fn grid_points(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, DatasetError> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(DatasetError::Sampler(alloc::format!("E({start}, {stop}, {step})")));
    }
    let m = libm::floor((stop - start) / step + 1e-9) as usize + 1;
    Ok((0..m).map(|i| (start + i as f64 * step).min(stop)).collect())
}

fn grid_size(m: usize, d: usize) -> Option<usize> {
    m.checked_pow(u32::try_from(d).ok()?)
}

/// Cartesian product of the 1-D grid over `d` features, first feature
/// varying slowest. Fails when the product exceeds `cap` rows.
pub fn sample_grid(
    start: f64,
    stop: f64,
    step: f64,
    d: usize,
    cap: usize,
) -> Result<Matrix, DatasetError> {
    let g = grid_points(start, stop, step)?;
    let total = grid_size(g.len(), d).unwrap_or(usize::MAX);
    if total > cap {
        return Err(DatasetError::GridCap { size: total, cap });
    }
    let idx: Vec<usize> = (0..total).collect();
    Ok(lattice_rows(&g, d, &idx))
}

fn lattice_rows(g: &[f64], d: usize, idx: &[usize]) -> Matrix {
    let m = g.len();
    let mut data = Vec::with_capacity(idx.len() * d);
    let mut digits = alloc::vec![0usize; d];
    for &k in idx {
        let mut rest = k;
        for slot in digits.iter_mut().rev() {
            *slot = rest % m;
            rest /= m;
        }
        data.extend(digits.iter().map(|&i| g[i]));
    }
    Matrix::from_vec(idx.len(), d, data)
}

/// `k` distinct grid points chosen uniformly at random, in random order.
pub(super) fn grid_subsample(
    start: f64,
    stop: f64,
    step: f64,
    d: usize,
    k: usize,
    seed: u64,
) -> Result<Matrix, DatasetError> {
    let g = grid_points(start, stop, step)?;
    let total = grid_size(g.len(), d)
        .ok_or_else(|| DatasetError::Sampler("grid index space overflows".into()))?;
    let mut r = rng(seed);
    let idx = rand::seq::index::sample(&mut r, total, k.min(total)).into_vec();
    Ok(lattice_rows(&g, d, &idx))
}

/// Latin hypercube with `n` strata per feature over the bounds of `space`.
pub fn latin_hypercube(space: &FeatureSpace, n: usize, seed: u64) -> Matrix {
    let d = space.dim();
    let mut r = rng(seed);
    let mut m = Matrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        let (lo, hi) = (space.lower[j], space.upper[j]);
        let w = (hi - lo) / n as f64;
        perm.shuffle(&mut r);
        for (i, &s) in perm.iter().enumerate() {
            let u: f64 = r.random();
            let mut v = lo + (s as f64 + u) * w;
            if libm::floor((v - lo) / w) as usize != s {
                v = lo + (s as f64 + 0.5) * w;
            }
            m[(i, j)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> FeatureSpace {
        let names: Vec<alloc::string::String> =
            (0..d).map(|i| alloc::format!("x{i}")).collect();
        FeatureSpace::from_parts(names, alloc::vec![0.0; d], alloc::vec![1.0; d]).unwrap()
    }

    #[test]
    fn grid_counts() {
        assert_eq!(grid_points(-5.0, 5.0, 0.1).unwrap().len(), 101);
        assert_eq!(grid_points(-5.0, 5.0, 0.01).unwrap().len(), 1001);
        assert_eq!(grid_points(0.0, 1.0, 1.0).unwrap(), alloc::vec![0.0, 1.0]);
        assert!(grid_points(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_cap_is_enforced() {
        assert_eq!(
            sample_grid(-5.0, 5.0, 0.01, 2, DEFAULT_GRID_CAP),
            Err(DatasetError::GridCap { size: 1_002_001, cap: DEFAULT_GRID_CAP })
        );
        let m = sample_grid(-5.0, 5.0, 0.1, 2, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(m.nrows(), 10_201);
        assert_eq!(m.row(0), &[-5.0, -5.0]);
        assert_eq!(m.row(1)[0], -5.0);
        assert_eq!(m.row(10_200), &[5.0, 5.0]);
    }

    #[test]
    fn subsample_is_distinct() {
        let m = grid_subsample(-5.0, 5.0, 0.01, 2, 1000, 4).unwrap();
        assert_eq!(m.nrows(), 1000);
        let mut rows: Vec<Vec<u64>> =
            m.rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), 1000);
    }

    #[test]
    fn uniform_and_lhs_shapes() {
        assert_eq!(sample_uniform(&unit(3), 0, 1).nrows(), 0);
        let m = latin_hypercube(&unit(2), 1, 9);
        assert!(unit(2).contains(m.row(0)));
    }
}
