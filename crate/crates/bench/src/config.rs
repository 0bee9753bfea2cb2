use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use exbench_core::explainers::{ExplainerConfig, ExplainerKind};
use exbench_core::metrics::{DEFAULT_LAMBDA, DEFAULT_NEIGHBORS};
use exbench_core::regressors::{HyperGrid, ModelKind};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// One regressor and its tuning grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSpec {
    pub id: ModelKind,
    /// Candidate values per hyper-parameter; the built-in grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<BTreeMap<String, Vec<f64>>>,
}

impl RegressorSpec {
    pub fn new(id: ModelKind) -> Self {
        Self { id, grid: None }
    }

    pub fn with_grid(id: ModelKind, grid: &[(&str, &[f64])]) -> Self {
        let grid = grid.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
        Self { id, grid: Some(grid) }
    }

    pub fn hyper_grid(&self) -> HyperGrid {
        match &self.grid {
            Some(g) => HyperGrid { params: g.iter().map(|(k, v)| (k.clone(), v.clone())).collect() },
            None => self.id.default_grid(),
        }
    }
}

/// Everything a benchmark run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry names; empty selects every entry.
    pub datasets: Vec<String>,
    /// Extra equation manifest appended to the bundled registry.
    pub manifest: Option<PathBuf>,
    pub regressors: Vec<RegressorSpec>,
    pub explainers: Vec<ExplainerKind>,
    pub explainer: ExplainerConfig,
    /// Repetitions of stochastic regressors; deterministic ones run once.
    pub repetitions: usize,
    /// Neighborhood scale for the robustness measures.
    pub lambda: f64,
    pub jaccard_k: usize,
    /// Neighbors drawn per evaluation point.
    pub neighbors: usize,
    /// Test points used for local explanations.
    pub local_points: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub grid_cap: usize,
    pub grid_subsample: usize,
    /// Cells forced to fail, as `dataset/regressor/repetition`.
    pub fault_injection: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            manifest: None,
            regressors: ModelKind::REGRESSORS.iter().map(|k| RegressorSpec::new(*k)).collect(),
            explainers: ExplainerKind::ALL.to_vec(),
            explainer: ExplainerConfig::default(),
            repetitions: 30,
            lambda: DEFAULT_LAMBDA,
            jaccard_k: 1,
            neighbors: DEFAULT_NEIGHBORS,
            local_points: 30,
            seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            grid_cap: exbench_core::dataset::DEFAULT_GRID_CAP,
            grid_subsample: 1000,
            fault_injection: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be positive");
        }
        if self.neighbors == 0 || self.local_points == 0 {
            return bad("neighbors and local_points must be at least 1");
        }
        if self.jaccard_k == 0 {
            return bad("jaccard_k must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.regressors.iter().any(|r| r.id == ModelKind::Truth) {
            return bad("`truth` is not a regressor");
        }
        self.explainer.validate().map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Repetitions run for `kind`.
    pub fn repetitions_for(&self, kind: ModelKind) -> usize {
        if kind.is_stochastic() {
            self.repetitions
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.regressors = vec![RegressorSpec::with_grid(ModelKind::Itea, &[("popsize", &[100.0]), ("gens", &[100.0])])];
        c.datasets = vec!["pagie-1".into()];
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ExperimentConfig::from_toml("seed = 4\nexplainers = [\"pe\", \"shap\"]\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.lambda, 0.001);
        assert_eq!(c.explainers, vec![ExplainerKind::Pe, ExplainerKind::Shap]);
        assert!(ExperimentConfig::from_toml("repetitions = 0").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn deterministic_regressors_run_once() {
        let c = ExperimentConfig::default();
        assert_eq!(c.repetitions_for(ModelKind::Linear), 1);
        assert_eq!(c.repetitions_for(ModelKind::Itea), 30);
    }
}
