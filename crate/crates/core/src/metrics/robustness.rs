use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Neighborhood;
use crate::explainers::ExplainError;
use crate::regressors::Model;

/// Local robustness of one explainer at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub stability: f64,
    pub infidelity: f64,
    pub jaccard: f64,
}

/// Mean squared Euclidean distance between the explanation at the center
/// and at each neighbor.
pub fn stability<E>(mut explain: E, nbhd: &Neighborhood) -> Result<f64, ExplainError>
where
    E: FnMut(&[f64]) -> Result<Vec<f64>, ExplainError>,
{
    let base = explain(&nbhd.center)?;
    let others = neighbor_explanations(&mut explain, nbhd)?;
    Ok(stability_from(&base, &others))
}

/// Mean of `(p . psi(x) - (f(x) - f(x - p)))^2` over perturbations
/// `p = x - x'` for each neighbor `x'`.
pub fn infidelity<E>(model: &dyn Model, mut explain: E, nbhd: &Neighborhood) -> Result<f64, ExplainError>
where
    E: FnMut(&[f64]) -> Result<Vec<f64>, ExplainError>,
{
    let base = explain(&nbhd.center)?;
    Ok(infidelity_from(model, &base, nbhd))
}

/// Mean Jaccard index between the top-`k` features at the center and at
/// each neighbor.
pub fn jaccard_stability<E>(mut explain: E, nbhd: &Neighborhood, k: usize) -> Result<f64, ExplainError>
where
    E: FnMut(&[f64]) -> Result<Vec<f64>, ExplainError>,
{
    let base = explain(&nbhd.center)?;
    let others = neighbor_explanations(&mut explain, nbhd)?;
    Ok(jaccard_from(&base, &others, k))
}

/// All three measures, explaining every neighbor once.
pub fn robustness<E>(model: &dyn Model, mut explain: E, nbhd: &Neighborhood, k: usize) -> Result<Robustness, ExplainError>
where
    E: FnMut(&[f64]) -> Result<Vec<f64>, ExplainError>,
{
    let base = explain(&nbhd.center)?;
    let others = neighbor_explanations(&mut explain, nbhd)?;
    Ok(Robustness {
        stability: stability_from(&base, &others),
        infidelity: infidelity_from(model, &base, nbhd),
        jaccard: jaccard_from(&base, &others, k),
    })
}

fn neighbor_explanations<E>(explain: &mut E, nbhd: &Neighborhood) -> Result<Vec<Vec<f64>>, ExplainError>
where
    E: FnMut(&[f64]) -> Result<Vec<f64>, ExplainError>,
{
    nbhd.points.rows().map(explain).collect()
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    v.sum::<f64>() / n as f64
}

pub(crate) fn stability_from(base: &[f64], others: &[Vec<f64>]) -> f64 {
    mean(others.iter().map(|o| base.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
}

pub(crate) fn infidelity_from(model: &dyn Model, base: &[f64], nbhd: &Neighborhood) -> f64 {
    let x = &nbhd.center;
    let fx = model.predict(x);
    let mut shifted = x.clone();
    mean(nbhd.points.rows().map(|xp| {
        let mut dot = 0.0;
        for j in 0..x.len() {
            let p = x[j] - xp[j];
            dot += p * base[j];
            shifted[j] = x[j] - p;
        }
        let e = dot - (fx - model.predict(&shifted));
        e * e
    }))
}

/// Indices of the `k` largest magnitudes, ties to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let inter = a.iter().filter(|i| b.contains(i)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub(crate) fn jaccard_from(base: &[f64], others: &[Vec<f64>], k: usize) -> f64 {
    let t = top_k(base, k);
    mean(others.iter().map(|o| jaccard(&t, &top_k(o, k))))
}
