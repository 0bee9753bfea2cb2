use exbench_core::explainers::{ExplainerKind, Scope};
use exbench_core::regressors::{HyperParams, ModelKind};
use serde::{Deserialize, Serialize};

/// Test-set accuracy of a fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub mae: f64,
    pub nmse: f64,
    pub r2: f64,
    /// The test targets were constant.
    pub degenerate: bool,
}

/// Scores of one explanation at one test point (local) or of the global
/// explanation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointScores {
    pub stability: Option<f64>,
    pub infidelity: Option<f64>,
    pub jaccard: Option<f64>,
    pub cosine: f64,
    pub cosine_degenerate: bool,
    pub nmse: f64,
    pub nmse_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ExplainStatus {
    Ok,
    Skipped { reason: String },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainerRecord {
    pub explainer: ExplainerKind,
    pub scope: Scope,
    #[serde(flatten)]
    pub status: ExplainStatus,
    pub seconds: f64,
    /// One vector for a global explanation, one per test point otherwise.
    pub values: Vec<Vec<f64>>,
    /// The same explainer applied to the ground truth.
    pub truth: Vec<Vec<f64>>,
    pub flags: Vec<String>,
    pub scores: Vec<PointScores>,
}

impl ExplainerRecord {
    pub fn skipped(explainer: ExplainerKind, scope: Scope, reason: impl Into<String>) -> Self {
        Self {
            explainer,
            scope,
            status: ExplainStatus::Skipped { reason: reason.into() },
            seconds: 0.0,
            values: Vec::new(),
            truth: Vec::new(),
            flags: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ExplainStatus::Ok
    }

    /// Per-point values of `measure`, skipping points where it is absent.
    pub fn measure(&self, measure: Measure) -> Vec<f64> {
        self.scores.iter().filter_map(|s| measure.of(s)).collect()
    }

    /// Mean of `measure` over the evaluated points.
    pub fn mean(&self, measure: Measure) -> Option<f64> {
        let v = self.measure(measure);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

/// One dataset x regressor x repetition result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub regressor: ModelKind,
    pub hyper: HyperParams,
    pub repetition: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub status: CellStatus,
    pub fit_seconds: f64,
    pub accuracy: Option<Accuracy>,
    pub size: Option<usize>,
    pub hit: Option<bool>,
    pub expression: Option<String>,
    pub model_flags: Vec<String>,
    pub explanations: Vec<ExplainerRecord>,
}

impl RunRecord {
    pub fn cell_id(&self) -> String {
        cell_id(&self.dataset, self.regressor, self.repetition)
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    /// The record with every wall-clock measurement zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.fit_seconds = 0.0;
        for e in &mut r.explanations {
            e.seconds = 0.0;
        }
        r
    }

    pub fn explanation(&self, kind: ExplainerKind, scope: Scope) -> Option<&ExplainerRecord> {
        self.explanations.iter().find(|e| e.explainer == kind && e.scope == scope)
    }
}

pub fn cell_id(dataset: &str, regressor: ModelKind, repetition: usize) -> String {
    format!("{dataset}/{regressor}/{repetition}")
}

/// Scores aggregated across records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Stability,
    Infidelity,
    Jaccard,
    Cosine,
    Nmse,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Stability, Measure::Infidelity, Measure::Jaccard, Measure::Cosine, Measure::Nmse];

    pub fn id(self) -> &'static str {
        match self {
            Measure::Stability => "stability",
            Measure::Infidelity => "infidelity",
            Measure::Jaccard => "jaccard",
            Measure::Cosine => "cosine",
            Measure::Nmse => "nmse",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Measure::Jaccard | Measure::Cosine)
    }

    /// Robustness measures exist only for local explanations.
    pub fn is_robustness(self) -> bool {
        matches!(self, Measure::Stability | Measure::Infidelity | Measure::Jaccard)
    }

    pub fn of(self, s: &PointScores) -> Option<f64> {
        match self {
            Measure::Stability => s.stability,
            Measure::Infidelity => s.infidelity,
            Measure::Jaccard => s.jaccard,
            Measure::Cosine => Some(s.cosine),
            Measure::Nmse => Some(s.nmse),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let r = RunRecord {
            dataset: "d".into(),
            regressor: ModelKind::Knn,
            hyper: HyperParams::new().with("n_neighbors", 5.0),
            repetition: 0,
            seed: u64::MAX,
            status: CellStatus::Failed { error: "boom".into() },
            fit_seconds: 0.25,
            accuracy: Some(Accuracy { mae: 0.1, nmse: 1e-300, r2: -3.5, degenerate: false }),
            size: None,
            hit: None,
            expression: None,
            model_flags: vec![],
            explanations: vec![ExplainerRecord::skipped(ExplainerKind::Pe, Scope::Local, "no symbolic form")],
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"status\":\"failed\""));
        assert_eq!(serde_json::from_str::<RunRecord>(&text).unwrap(), r);
    }
}
