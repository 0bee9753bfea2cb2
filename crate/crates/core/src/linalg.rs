//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Least squares always returns the minimum-norm solution: the system is
//! column-equilibrated, reduced with a Householder QR, and the triangular
//! factor is pseudo-inverted through its SVD so rank deficiency is detected
//! from the singular values.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("non-finite entries in linear system")]
    NonFinite,
    #[error("dimension mismatch: {rows} rows but rhs of length {rhs}")]
    Dimension { rows: usize, rhs: usize },
    #[error("singular value decomposition did not converge")]
    NoConvergence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstsqSolution {
    pub coef: Vec<f64>,
    pub rank: usize,
}

impl LstsqSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.coef.len()
    }
}

/// Minimum-norm solution of `min ||A x - b||`, `A` given row-major.
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<LstsqSolution, LinalgError> {
    lstsq_raw(a.nrows(), a.ncols(), a.as_slice(), b)
}

pub(crate) fn lstsq_raw(
    n: usize,
    p: usize,
    row_major: &[f64],
    b: &[f64],
) -> Result<LstsqSolution, LinalgError> {
    if b.len() != n {
        return Err(LinalgError::Dimension { rows: n, rhs: b.len() });
    }
    if p == 0 {
        return Ok(LstsqSolution { coef: Vec::new(), rank: 0 });
    }
    if !row_major.iter().chain(b).all(|v| v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut a = DMatrix::from_row_slice(n, p, row_major);
    // Column equilibration; zero columns stay zero and get zero weight.
    let mut scale = vec![1.0; p];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            *s = norm;
            a.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    let rhs = DVector::from_column_slice(b);
    let (core, core_rhs) = if n > p {
        let qr = a.qr();
        let mut qtb = rhs;
        qr.q_tr_mul(&mut qtb);
        let r = qr.r();
        (r, qtb.rows(0, p).into_owned())
    } else {
        (a, rhs)
    };
    let svd = core.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let tol = smax * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let x = svd
        .solve(&core_rhs, tol)
        .map_err(|_| LinalgError::NoConvergence)?;
    let coef = x
        .iter()
        .zip(&scale)
        .map(|(v, s)| v / s)
        .collect::<Vec<_>>();
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NoConvergence);
    }
    Ok(LstsqSolution { coef, rank })
}

/// Affine least-squares fit `y ~ b0 + X b`, optionally weighted.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub rank_deficient: bool,
}

/// Fits an intercept plus slopes. The data are centered (with weighted
/// means when weights are given) so the minimum-norm rule applies to the
/// slopes only and a constant target gives zero slopes.
pub fn affine_fit(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<AffineFit, LinalgError> {
    let n = x.nrows();
    let d = x.ncols();
    if y.len() != n {
        return Err(LinalgError::Dimension { rows: n, rhs: y.len() });
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let wsum: f64 = w.iter().sum();
    if n == 0 || wsum <= 0.0 {
        return Ok(AffineFit {
            intercept: 0.0,
            coef: vec![0.0; d],
            rank_deficient: true,
        });
    }
    let mut xm = vec![0.0; d];
    let mut ym = 0.0;
    for (i, r) in x.rows().enumerate() {
        for (m, v) in xm.iter_mut().zip(r) {
            *m += w[i] * v;
        }
        ym += w[i] * y[i];
    }
    xm.iter_mut().for_each(|m| *m /= wsum);
    ym /= wsum;

    let mut a = Vec::with_capacity(n * d);
    let mut b = Vec::with_capacity(n);
    for (i, r) in x.rows().enumerate() {
        let sw = libm::sqrt(w[i]);
        a.extend(r.iter().zip(&xm).map(|(v, m)| sw * (v - m)));
        b.push(sw * (y[i] - ym));
    }
    let sol = lstsq_raw(n, d, &a, &b)?;
    let intercept = ym - sol.coef.iter().zip(&xm).map(|(c, m)| c * m).sum::<f64>();
    Ok(AffineFit {
        intercept,
        rank_deficient: sol.rank_deficient(),
        coef: sol.coef,
    })
}

/// Symmetric factor `L` with `L L^T = S` for a symmetric positive
/// semidefinite `S`. Negative eigenvalues (numerical noise) are clipped to
/// zero; the most negative clipped eigenvalue is returned alongside.
pub fn psd_factor(s: &Matrix) -> (Matrix, f64) {
    let d = s.nrows();
    if d == 0 {
        return (Matrix::zeros(0, 0), 0.0);
    }
    let m = DMatrix::from_row_slice(d, d, s.as_slice());
    let eig = SymmetricEigen::new(m);
    let mut clipped = 0.0_f64;
    let mut l = Matrix::zeros(d, d);
    for k in 0..d {
        let mut ev = eig.eigenvalues[k];
        if ev < 0.0 {
            clipped = clipped.min(ev);
            ev = 0.0;
        }
        let root = libm::sqrt(ev);
        for i in 0..d {
            l[(i, k)] = eig.eigenvectors[(i, k)] * root;
        }
    }
    (l, clipped)
}

/// Solves the square system `A x = b` for a symmetric positive definite
/// `A` (row-major), falling back to minimum-norm least squares.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let p = b.len();
    if a.len() != p * p {
        return Err(LinalgError::Dimension { rows: p, rhs: a.len() });
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let m = DMatrix::from_row_slice(p, p, a);
    let rhs = DVector::from_column_slice(b);
    if let Some(ch) = m.clone().cholesky() {
        let x = ch.solve(&rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x.iter().copied().collect());
        }
    }
    lstsq_raw(p, p, a, b).map(|s| s.coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_on_duplicated_column() {
        // x1 == x2, y = 2 x1: min-norm splits the weight evenly.
        let x = Matrix::from_rows(&[
            alloc::vec![1.0, 1.0],
            alloc::vec![2.0, 2.0],
            alloc::vec![3.0, 3.0],
        ]);
        let sol = lstsq(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!(sol.rank_deficient());
        assert!((sol.coef[0] - 1.0).abs() < 1e-12);
        assert!((sol.coef[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_fit_recovers_exact_plane() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| alloc::vec![i as f64 * 0.3 - 2.0, (i * i % 7) as f64])
            .collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = rows.iter().map(|r| 1.5 + 3.0 * r[0] + 2.0 * r[1]).collect();
        let fit = affine_fit(&x, &y, None).unwrap();
        assert!((fit.intercept - 1.5).abs() < 1e-10);
        assert!((fit.coef[0] - 3.0).abs() < 1e-10);
        assert!((fit.coef[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let s = Matrix::from_rows(&[alloc::vec![4.0, 2.0], alloc::vec![2.0, 3.0]]);
        let (l, clipped) = psd_factor(&s);
        assert_eq!(clipped, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[(i, k)] * l[(j, k)]).sum();
                assert!((v - s[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let x = Matrix::from_rows(&[alloc::vec![f64::NAN], alloc::vec![1.0]]);
        assert_eq!(lstsq(&x, &[1.0, 2.0]), Err(LinalgError::NonFinite));
    }
}
