//! Levenberg-Marquardt for small nonlinear least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{ExprError, ExprTree, Program, Wrt};
use crate::linalg::solve_spd;
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmConfig {
    /// Number of trial steps.
    pub max_iter: usize,
    pub lambda0: f64,
    /// Damping multiplier after a rejected step.
    pub up: f64,
    /// Damping divisor after an accepted step.
    pub down: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iter: 10, lambda0: 1e-3, up: 2.0, down: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `||r||^2` at the start.
    pub initial_cost: f64,
    /// `||r||^2` after every accepted step, starting with the initial cost.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl LmReport {
    pub fn cost(&self) -> f64 {
        *self.history.last().unwrap_or(&self.initial_cost)
    }
}

/// Minimizes `||r(theta)||^2`. `eval(theta, r, jac)` fills the residuals
/// and, when `jac` is given, the row-major `n x p` Jacobian.
///
/// A step is accepted only when it lowers the cost, so the returned cost
/// never exceeds the initial one.
pub fn levenberg_marquardt<F>(theta0: &[f64], n: usize, cfg: &LmConfig, mut eval: F) -> LmReport
where
    F: FnMut(&[f64], &mut [f64], Option<&mut [f64]>),
{
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut r = vec![0.0; n];
    let mut jac = vec![0.0; n * p];
    eval(&theta, &mut r, Some(&mut jac));
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut cost = sq(&r);
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut lambda = cfg.lambda0;
    let mut trial = vec![0.0; p];
    let mut rt = vec![0.0; n];
    let mut jtj = vec![0.0; p * p];
    let mut jtr = vec![0.0; p];
    let mut fresh = true;
    let mut iterations = 0;
    if !cost.is_finite() || p == 0 {
        return LmReport { params: theta, initial_cost, history, iterations };
    }
    while iterations < cfg.max_iter {
        if fresh {
            jtj.fill(0.0);
            jtr.fill(0.0);
            for i in 0..n {
                let row = &jac[i * p..(i + 1) * p];
                for a in 0..p {
                    jtr[a] += row[a] * r[i];
                    for b in a..p {
                        jtj[a * p + b] += row[a] * row[b];
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    jtj[a * p + b] = jtj[b * p + a];
                }
            }
            fresh = false;
            if !jtj.iter().chain(&jtr).all(|v| v.is_finite()) || jtr.iter().all(|v| *v == 0.0) {
                break;
            }
        }
        iterations += 1;
        let mut a = jtj.clone();
        for k in 0..p {
            let d = jtj[k * p + k];
            a[k * p + k] += lambda * if d > 0.0 { d } else { 1.0 };
        }
        let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
        let step = match solve_spd(&a, &rhs) {
            Ok(s) => s,
            Err(_) => {
                lambda *= cfg.up;
                continue;
            }
        };
        for k in 0..p {
            trial[k] = theta[k] + step[k];
        }
        eval(&trial, &mut rt, None);
        let c = sq(&rt);
        if c < cost {
            theta.copy_from_slice(&trial);
            eval(&theta, &mut r, Some(&mut jac));
            cost = c;
            history.push(cost);
            lambda /= cfg.down;
            fresh = true;
        } else {
            lambda *= cfg.up;
        }
    }
    LmReport { params: theta, initial_cost, history, iterations }
}

/// Symbolic parameter derivatives of `tree`, compiled.
pub fn parameter_jacobian(tree: &ExprTree) -> Result<Vec<Program>, ExprError> {
    (0..tree.param_count())
        .map(|k| tree.differentiate(Wrt::Param(k)).map(|d| d.compile()))
        .collect()
}

/// Fits the parameters of `tree` to `(x, y)` with symbolic Jacobians.
pub fn fit_parameters(
    tree: &ExprTree,
    x: &Matrix,
    y: &[f64],
    theta0: &[f64],
    cfg: &LmConfig,
) -> Result<LmReport, ExprError> {
    let f = tree.compile();
    let grads = parameter_jacobian(tree)?;
    let p = theta0.len();
    if p < tree.param_count() {
        return Err(ExprError::ParameterOutOfRange { index: tree.param_count() - 1, len: p });
    }
    let report = levenberg_marquardt(theta0, y.len(), cfg, |theta, r, jac| {
        match f.eval_batch(x, theta) {
            Ok(v) => r.iter_mut().zip(v.iter().zip(y)).for_each(|(ri, (vi, yi))| *ri = vi - yi),
            Err(_) => r.fill(f64::NAN),
        }
        if let Some(j) = jac {
            for (k, g) in grads.iter().enumerate() {
                let col = g.eval_batch(x, theta).unwrap_or_else(|_| vec![f64::NAN; y.len()]);
                for (i, v) in col.into_iter().enumerate() {
                    j[i * p + k] = v;
                }
            }
        }
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn recovers_sine_skeleton() {
        let xs: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| 2.5 * libm::sin(*v) + 1.0).collect();
        let x = Matrix::from_vec(100, 1, xs);
        let t = parse("$0 * sin($2 * x) + $1", &["x"]).unwrap();
        let cfg = LmConfig { max_iter: 25, ..LmConfig::default() };
        let rep = fit_parameters(&t, &x, &y, &[1.0, 0.0, 0.9], &cfg).unwrap();
        for (got, want) in rep.params.iter().zip([2.5, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-6, "{:?}", rep.params);
        }
        assert!(rep.history.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.cost() <= rep.initial_cost);
    }

    #[test]
    fn non_finite_start_is_returned_unchanged() {
        let rep = levenberg_marquardt(&[1.0], 2, &LmConfig::default(), |_, r, _| r.fill(f64::NAN));
        assert_eq!(rep.params, vec![1.0]);
        assert_eq!(rep.iterations, 0);
    }
}
