use serde::{Deserialize, Serialize};

/// A metric value plus whether a degenerate fallback was used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    pub fn plain(value: f64) -> Self {
        Self { value, degenerate: false }
    }
}

fn sse(yhat: &[f64], y: &[f64]) -> f64 {
    assert_eq!(yhat.len(), y.len(), "length mismatch");
    yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn sst(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Coefficient of determination. A constant `y` is flagged and scores 1
/// for a perfect fit, 0 otherwise.
pub fn r2(yhat: &[f64], y: &[f64]) -> Score {
    let e = sse(yhat, y);
    let t = sst(y);
    if t > 0.0 {
        Score::plain(1.0 - e / t)
    } else {
        Score { value: if e == 0.0 { 1.0 } else { 0.0 }, degenerate: true }
    }
}

pub fn mae(yhat: &[f64], y: &[f64]) -> f64 {
    assert_eq!(yhat.len(), y.len(), "length mismatch");
    yhat.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

pub fn mse(yhat: &[f64], y: &[f64]) -> f64 {
    sse(yhat, y) / y.len() as f64
}

/// MSE over the population variance of `y`; a constant `y` falls back to
/// plain MSE and is flagged.
pub fn nmse_pred(yhat: &[f64], y: &[f64]) -> Score {
    let e = sse(yhat, y);
    let t = sst(y);
    if t > 0.0 {
        Score::plain(e / t)
    } else {
        Score { value: e / y.len() as f64, degenerate: true }
    }
}
