use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruth;
use crate::explainers::{explain, Background, ExplainError, ExplainerConfig, ExplainerKind, Explanation, Scope};
use crate::regressors::{FittedModel, ModelKind, ModelMeta};

/// Agreement between an explanation and the ground-truth explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub measure: String,
    pub value: f64,
    pub degenerate: bool,
}

/// Cosine similarity. A zero vector on either side is flagged and
/// scores 0.
pub fn cosine_quality(truth: &[f64], expl: &[f64]) -> QualityScore {
    assert_eq!(truth.len(), expl.len(), "length mismatch");
    let dot: f64 = truth.iter().zip(expl).map(|(a, b)| a * b).sum();
    let na = libm::sqrt(truth.iter().map(|v| v * v).sum::<f64>());
    let nb = libm::sqrt(expl.iter().map(|v| v * v).sum::<f64>());
    let (value, degenerate) = if na == 0.0 || nb == 0.0 { (0.0, true) } else { ((dot / (na * nb)).clamp(-1.0, 1.0), false) };
    QualityScore { measure: "cosine".into(), value, degenerate }
}

/// Squared error normalized by the spread of the truth vector. A constant
/// truth vector is flagged and scores the plain mean squared error.
pub fn nmse_quality(truth: &[f64], expl: &[f64]) -> QualityScore {
    assert_eq!(truth.len(), expl.len(), "length mismatch");
    let d = truth.len() as f64;
    let sse: f64 = truth.iter().zip(expl).map(|(a, b)| (a - b) * (a - b)).sum();
    let m = truth.iter().sum::<f64>() / d;
    let sst: f64 = truth.iter().map(|v| (v - m) * (v - m)).sum();
    let (value, degenerate) = if sst > 0.0 { (sse / sst, false) } else { (sse / d, true) };
    QualityScore { measure: "nmse".into(), value, degenerate }
}

/// The ground-truth function as a fitted model.
pub fn truth_model(gt: &GroundTruth) -> Result<FittedModel, crate::expr::ExprError> {
    FittedModel::from_expr(ModelKind::Truth, gt.space.dim(), gt.tree.clone(), ModelMeta::default())
}

/// Explains the ground-truth function exactly as a fitted model would be.
pub fn truth_explanation(
    gt: &GroundTruth,
    kind: ExplainerKind,
    scope: Scope,
    data: Background<'_>,
    point: Option<&[f64]>,
    cfg: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    let model = truth_model(gt).map_err(|e| ExplainError::Config(alloc::format!("{e}")))?;
    explain(kind, scope, &model, data, point, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        assert!((cosine_quality(&[1.0, 2.0], &[2.0, 4.0]).value - 1.0).abs() < 1e-15);
        assert!((cosine_quality(&[1.0, 2.0], &[-1.0, -2.0]).value + 1.0).abs() < 1e-15);
        assert_eq!(cosine_quality(&[1.0, 0.0], &[0.0, 1.0]).value, 0.0);
        let z = cosine_quality(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(z.degenerate && z.value == 0.0);
    }

    #[test]
    fn nmse_cases() {
        assert_eq!(nmse_quality(&[1.0, 3.0], &[1.0, 3.0]).value, 0.0);
        let q = nmse_quality(&[0.0, 2.0], &[0.0, 0.0]);
        assert_eq!((q.value, q.degenerate), (2.0, false));
        let f = nmse_quality(&[1.0, 1.0], &[0.0, 3.0]);
        assert_eq!((f.value, f.degenerate), (2.5, true));
    }
}
