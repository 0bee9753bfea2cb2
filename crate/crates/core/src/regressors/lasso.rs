use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::linear::{affine_tree, fit_linear};
use super::{check_data, FittedModel, ModelKind, ModelMeta, RegressorError};
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoConfig {
    pub alpha: f64,
    /// Duality-gap tolerance relative to `||y - mean(y)||^2 / n`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self { alpha: 1.0, tol: 1e-6, max_sweeps: 10_000 }
    }
}

#[inline]
fn soft_threshold(rho: f64, alpha: f64) -> f64 {
    if rho > alpha {
        rho - alpha
    } else if rho < -alpha {
        rho + alpha
    } else {
        0.0
    }
}

/// Coordinate descent on `(1/2n)||y - X b||^2 + alpha ||b||_1` over
/// standardized features; coefficients are reported on the original scale.
pub fn fit_lasso(x: &Matrix, y: &[f64], cfg: &LassoConfig) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if !(cfg.alpha >= 0.0) || !cfg.alpha.is_finite() {
        return Err(RegressorError::Hyper { name: "alpha".to_string(), value: cfg.alpha });
    }
    if cfg.alpha == 0.0 {
        let mut m = fit_linear(x, y)?;
        m.kind = ModelKind::Lasso;
        m.meta.info.insert("solver".into(), "ols".into());
        return Ok(m);
    }
    let n = x.nrows();
    let d = x.ncols();
    let nf = n as f64;
    let means = x.column_means();
    let ymean = y.iter().sum::<f64>() / nf;
    // Population standard deviations; constant columns are left out.
    let mut scale = vec![0.0; d];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut c: Vec<f64> = x.rows().map(|r| r[j] - means[j]).collect();
        let sd = libm::sqrt(c.iter().map(|v| v * v).sum::<f64>() / nf);
        if sd > 0.0 {
            c.iter_mut().for_each(|v| *v /= sd);
            scale[j] = sd;
        }
        cols.push(c);
    }
    let yc: Vec<f64> = y.iter().map(|v| v - ymean).collect();
    let ynorm2: f64 = yc.iter().map(|v| v * v).sum();
    let mut beta = vec![0.0; d];
    let mut resid = yc.clone();
    let mut converged = ynorm2 == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < cfg.max_sweeps {
        sweeps += 1;
        for j in 0..d {
            if scale[j] == 0.0 {
                continue;
            }
            let c = &cols[j];
            let old = beta[j];
            let rho = c.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + old;
            let new = soft_threshold(rho, cfg.alpha);
            if new != old {
                let delta = new - old;
                resid.iter_mut().zip(c).for_each(|(r, a)| *r -= delta * a);
                beta[j] = new;
            }
        }
        converged = duality_gap(&cols, &scale, &yc, &resid, &beta, cfg.alpha) <= cfg.tol * ynorm2 / nf;
    }
    let coef: Vec<f64> = beta
        .iter()
        .zip(&scale)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = ymean - coef.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
    let mut meta = ModelMeta::default();
    meta.info.insert("sweeps".into(), sweeps.to_string());
    if !converged {
        meta.flags.push("not_converged".to_string());
    }
    let mask = coef.iter().map(|c| *c != 0.0).collect();
    let m = FittedModel::from_expr(ModelKind::Lasso, d, affine_tree(intercept, &coef), meta)?;
    Ok(m.with_mask(Some(mask)))
}

/// Gap of the `(1/2n)`-scaled primal and its dual.
fn duality_gap(cols: &[Vec<f64>], scale: &[f64], yc: &[f64], resid: &[f64], beta: &[f64], alpha: f64) -> f64 {
    let n = yc.len() as f64;
    let mut dual_norm = 0.0_f64;
    for (c, s) in cols.iter().zip(scale) {
        if *s > 0.0 {
            let g = c.iter().zip(resid).map(|(a, r)| a * r).sum::<f64>() / n;
            dual_norm = dual_norm.max(g.abs());
        }
    }
    let r2: f64 = resid.iter().map(|r| r * r).sum::<f64>() / n;
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let k = if dual_norm > alpha { alpha / dual_norm } else { 1.0 };
    let ry: f64 = resid.iter().zip(yc).map(|(r, y)| r * y).sum::<f64>() / n;
    let primal = 0.5 * r2 + alpha * l1;
    let dual = k * ry - 0.5 * k * k * r2;
    primal - dual
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::Model;

    fn data() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![libm::sin(i as f64 * 0.37) * 2.0, libm::cos(i as f64 * 1.3), (i % 7) as f64])
            .collect();
        let y = rows.iter().map(|r| 1.0 + 3.0 * r[0] - 2.0 * r[1] + 0.1 * r[2]).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn zero_alpha_is_ols() {
        let (x, y) = data();
        let a = fit_lasso(&x, &y, &LassoConfig { alpha: 0.0, ..Default::default() }).unwrap();
        let b = fit_linear(&x, &y).unwrap();
        for r in x.rows() {
            assert!((a.predict(r) - b.predict(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_alpha_zeroes_everything() {
        let (x, y) = data();
        let m = fit_lasso(&x, &y, &LassoConfig { alpha: 1e6, ..Default::default() }).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(m.symbolic().unwrap().size(), 1);
        assert!((m.predict(&[0.0, 0.0, 0.0]) - mean).abs() < 1e-12);
        assert_eq!(m.feature_mask(), Some(&[false, false, false][..]));
    }

    #[test]
    fn one_dimensional_soft_threshold() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1 - 2.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| 1.5 * v + libm::sin(7.0 * v) + 0.3).collect();
        let x = Matrix::from_vec(50, 1, xs.clone());
        let n = 50.0;
        let mx = xs.iter().sum::<f64>() / n;
        let sd = libm::sqrt(xs.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n);
        let my = y.iter().sum::<f64>() / n;
        let rho: f64 = xs.iter().zip(&y).map(|(a, b)| (a - mx) / sd * (b - my)).sum::<f64>() / n;
        for alpha in [0.01, 0.5, 1.0, 5.0] {
            let expect = rho.signum() * (rho.abs() - alpha).max(0.0) / sd;
            let m = fit_lasso(&x, &y, &LassoConfig { alpha, ..Default::default() }).unwrap();
            let g = m.gradient(&[0.0]).unwrap()[0];
            assert!((g - expect).abs() < 1e-10, "alpha {alpha}: {g} vs {expect}");
        }
    }
}
