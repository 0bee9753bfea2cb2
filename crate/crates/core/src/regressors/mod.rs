//! Regression trainers behind one fitted-model contract.
//!
//! Every trainer returns a [`FittedModel`]. Models with a symbolic form
//! (linear, lasso, ITEA, GP-NLS and wrapped ground truths) predict by
//! evaluating that form, so the two always agree.

mod cart;
mod gpnls;
mod grid;
mod itea;
mod knn;
mod lasso;
mod linear;
pub mod lm;
mod ptc2;
mod tape;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprError, ExprTree, ItExpression, Program, Wrt};
use crate::linalg::LinalgError;
use crate::Matrix;

pub use cart::{fit_forest, fit_tree, fit_tree_with, Forest, ForestConfig, MaxFeatures, Tree, TreeConfig, TreeNode};
pub use gpnls::{expand, fit_gpnls, GpNlsConfig};
pub use grid::{grid_search, kfold_indices, CvRow, GridResult};
pub use itea::{fit_itea, IteaConfig};
pub use knn::{fit_knn, Knn};
pub use lasso::{fit_lasso, LassoConfig};
pub use linear::fit_linear;
pub use ptc2::{ptc2, Ptc2Config};
pub use tape::Tape;

/// Model outputs that are not finite are replaced by `±PREDICTION_SENTINEL`.
pub const PREDICTION_SENTINEL: f64 = 1e30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("training data is empty")]
    Empty,
    #[error("{rows} rows but {targets} targets")]
    Shape { rows: usize, targets: usize },
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("invalid hyper-parameter {name} = {value}")]
    Hyper { name: String, value: f64 },
    #[error("unknown regressor `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub(crate) fn check_data(x: &Matrix, y: &[f64]) -> Result<(), RegressorError> {
    if x.nrows() != y.len() {
        return Err(RegressorError::Shape { rows: x.nrows(), targets: y.len() });
    }
    if y.is_empty() {
        return Err(RegressorError::Empty);
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(RegressorError::NonFinite);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Lasso,
    Knn,
    Tree,
    Forest,
    Itea,
    GpNls,
    /// A ground-truth equation wrapped as a model.
    Truth,
}

impl ModelKind {
    pub const REGRESSORS: [ModelKind; 7] = [
        ModelKind::Linear,
        ModelKind::Lasso,
        ModelKind::Knn,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Itea,
        ModelKind::GpNls,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Lasso => "lasso",
            ModelKind::Knn => "knn",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Itea => "itea",
            ModelKind::GpNls => "gpnls",
            ModelKind::Truth => "truth",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::REGRESSORS
            .iter()
            .chain(&[ModelKind::Truth])
            .copied()
            .find(|k| k.id() == id)
    }

    /// Whether fits depend on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, ModelKind::Forest | ModelKind::Itea | ModelKind::GpNls)
    }

    /// Whether fitted models carry a symbolic form.
    pub fn is_symbolic(self) -> bool {
        matches!(
            self,
            ModelKind::Linear | ModelKind::Lasso | ModelKind::Itea | ModelKind::GpNls | ModelKind::Truth
        )
    }

    /// Tuning grid for the regressor.
    pub fn default_grid(self) -> HyperGrid {
        let g = |pairs: &[(&str, &[f64])]| HyperGrid {
            params: pairs.iter().map(|(n, v)| (n.to_string(), v.to_vec())).collect(),
        };
        match self {
            ModelKind::Linear | ModelKind::Truth => g(&[]),
            ModelKind::Lasso => g(&[("alpha", &[0.001, 0.01, 0.1, 1.0, 10.0])]),
            ModelKind::Knn => g(&[(
                "n_neighbors",
                &[3.0, 5.0, 7.0, 9.0, 11.0, 17.0, 19.0, 23.0, 29.0, 31.0],
            )]),
            ModelKind::Tree => g(&[("max_depth", &[5.0, 10.0, 15.0]), ("max_leaf_nodes", &[5.0, 10.0, 15.0])]),
            ModelKind::Forest => g(&[
                ("n_estimators", &[100.0, 200.0, 300.0]),
                ("min_samples_split", &[0.01, 0.05, 0.1]),
            ]),
            ModelKind::Itea => g(&[("popsize", &[100.0, 250.0, 500.0]), ("gens", &[100.0, 250.0, 500.0])]),
            ModelKind::GpNls => g(&[
                ("population_size", &[100.0, 250.0, 500.0]),
                ("generations", &[100.0, 250.0, 500.0]),
            ]),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Named numeric hyper-parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperParams(pub BTreeMap<String, f64>);

impl HyperParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn get_or(&self, name: &str, default: f64) -> f64 {
        self.get(name).unwrap_or(default)
    }

    /// A positive integer parameter.
    pub fn count(&self, name: &str, default: usize) -> Result<usize, RegressorError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) if v >= 1.0 && libm::trunc(v) == v => Ok(v as usize),
            Some(v) => Err(RegressorError::Hyper { name: name.to_string(), value: v }),
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Candidate values per hyper-parameter; the grid is their Cartesian product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub params: Vec<(String, Vec<f64>)>,
}

impl HyperGrid {
    /// All combinations, the first parameter varying slowest. An empty grid
    /// has exactly one (empty) cell.
    pub fn cells(&self) -> Vec<HyperParams> {
        let mut cells = alloc::vec![HyperParams::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for c in &cells {
                for &v in values {
                    next.push(c.clone().with(name, v));
                }
            }
            cells = next;
        }
        cells
    }
}

/// Anything that maps a feature vector to a prediction.
pub trait Model {
    fn dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> f64;

    fn predict_batch(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// Closed-form expression of the model, if any.
    fn symbolic(&self) -> Option<&ExprTree> {
        None
    }

    /// Exact gradient, when the model has one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Features the model actually uses, when known.
    fn feature_mask(&self) -> Option<&[bool]> {
        None
    }
}

#[inline]
pub fn clamp_prediction(v: f64) -> (f64, bool) {
    if v.is_finite() {
        (v, false)
    } else if v == f64::NEG_INFINITY {
        (-PREDICTION_SENTINEL, true)
    } else {
        (PREDICTION_SENTINEL, true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelBody {
    Expr(Program),
    Knn(Knn),
    Tree(Tree),
    Forest(Forest),
}

/// Training metadata carried with a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub hyper: HyperParams,
    pub seed: u64,
    /// Filled in by callers that can measure time.
    pub fit_seconds: f64,
    /// Notable conditions, e.g. `rank_deficient`, `not_converged`.
    pub flags: Vec<String>,
    /// Free-form settings worth recording (selection scheme and the like).
    pub info: BTreeMap<String, String>,
    /// Interaction-transformation form, for ITEA models.
    pub it: Option<ItExpression>,
}

/// A trained regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct FittedModel {
    kind: ModelKind,
    dim: usize,
    body: ModelBody,
    form: Option<ExprTree>,
    gradient: Option<Vec<Program>>,
    mask: Option<Vec<bool>>,
    pub meta: ModelMeta,
}

impl FittedModel {
    /// A model that predicts by evaluating `form`.
    pub fn from_expr(kind: ModelKind, dim: usize, form: ExprTree, meta: ModelMeta) -> Result<Self, ExprError> {
        if form.min_dim() > dim {
            return Err(ExprError::VariableOutOfRange { index: form.min_dim() - 1, dim });
        }
        if form.param_count() > 0 {
            return Err(ExprError::Invalid("model form has unbound parameters".into()));
        }
        let mut gradient = Vec::with_capacity(dim);
        for j in 0..dim {
            gradient.push(form.differentiate(Wrt::Var(j))?.compile());
        }
        let used = form.variables();
        let mask = (0..dim).map(|j| used.binary_search(&j).is_ok()).collect();
        Ok(Self {
            kind,
            dim,
            body: ModelBody::Expr(form.compile()),
            form: Some(form),
            gradient: Some(gradient),
            mask: Some(mask),
            meta,
        })
    }

    pub(crate) fn from_body(kind: ModelKind, dim: usize, body: ModelBody, meta: ModelMeta) -> Self {
        Self { kind, dim, body, form: None, gradient: None, mask: None, meta }
    }

    /// Replaces the feature mask (`None` means every feature is used).
    pub fn with_mask(mut self, mask: Option<Vec<bool>>) -> Self {
        self.mask = mask;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn body(&self) -> &ModelBody {
        &self.body
    }

    /// Node count of the symbolic form.
    pub fn size(&self) -> Option<usize> {
        self.form.as_ref().map(ExprTree::size)
    }

    fn raw(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "model expects {} features", self.dim);
        match &self.body {
            ModelBody::Expr(p) => p.eval(x, &[]).unwrap_or(f64::NAN),
            ModelBody::Knn(m) => m.predict(x),
            ModelBody::Tree(t) => t.predict(x),
            ModelBody::Forest(f) => f.predict(x),
        }
    }

    /// Prediction plus whether it had to be clamped.
    pub fn predict_flagged(&self, x: &[f64]) -> (f64, bool) {
        clamp_prediction(self.raw(x))
    }
}

impl Model for FittedModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_flagged(x).0
    }

    fn predict_batch(&self, x: &Matrix) -> Vec<f64> {
        assert_eq!(x.ncols(), self.dim, "model expects {} features", self.dim);
        match &self.body {
            ModelBody::Expr(p) => {
                let mut out = p.eval_batch(x, &[]).unwrap_or_else(|_| alloc::vec![f64::NAN; x.nrows()]);
                out.iter_mut().for_each(|v| *v = clamp_prediction(*v).0);
                out
            }
            _ => x.rows().map(|r| self.predict(r)).collect(),
        }
    }

    fn symbolic(&self) -> Option<&ExprTree> {
        self.form.as_ref()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let g = self.gradient.as_ref()?;
        Some(g.iter().map(|p| p.eval(x, &[]).unwrap_or(f64::NAN)).collect())
    }

    fn feature_mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BodyDoc {
    Expr,
    Knn(Knn),
    Tree(Tree),
    Forest(Forest),
}

/// Persisted model document.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelDoc {
    kind: ModelKind,
    dim: usize,
    form: Option<ExprTree>,
    feature_mask: Option<Vec<bool>>,
    meta: ModelMeta,
    body: BodyDoc,
}

impl From<FittedModel> for ModelDoc {
    fn from(m: FittedModel) -> Self {
        let body = match m.body {
            ModelBody::Expr(_) => BodyDoc::Expr,
            ModelBody::Knn(k) => BodyDoc::Knn(k),
            ModelBody::Tree(t) => BodyDoc::Tree(t),
            ModelBody::Forest(f) => BodyDoc::Forest(f),
        };
        ModelDoc { kind: m.kind, dim: m.dim, form: m.form, feature_mask: m.mask, meta: m.meta, body }
    }
}

impl TryFrom<ModelDoc> for FittedModel {
    type Error = String;

    fn try_from(d: ModelDoc) -> Result<Self, String> {
        let body = match d.body {
            BodyDoc::Expr => {
                let form = d.form.ok_or("expression model without a form")?;
                return FittedModel::from_expr(d.kind, d.dim, form, d.meta)
                    .map(|m| m.with_mask(d.feature_mask))
                    .map_err(|e| e.to_string());
            }
            BodyDoc::Knn(k) => ModelBody::Knn(k),
            BodyDoc::Tree(t) => ModelBody::Tree(t),
            BodyDoc::Forest(f) => ModelBody::Forest(f),
        };
        Ok(FittedModel::from_body(d.kind, d.dim, body, d.meta).with_mask(d.feature_mask))
    }
}

/// Fits `kind` with the given hyper-parameters.
pub fn fit(
    kind: ModelKind,
    x: &Matrix,
    y: &[f64],
    hyper: &HyperParams,
    seed: u64,
) -> Result<FittedModel, RegressorError> {
    let mut model = match kind {
        ModelKind::Linear => fit_linear(x, y)?,
        ModelKind::Lasso => fit_lasso(x, y, &LassoConfig { alpha: hyper.get_or("alpha", 1.0), ..LassoConfig::default() })?,
        ModelKind::Knn => fit_knn(x, y, hyper.count("n_neighbors", 5)?)?,
        ModelKind::Tree => {
            let cfg = TreeConfig {
                max_depth: hyper.get("max_depth").map(|_| hyper.count("max_depth", 0)).transpose()?,
                max_leaf_nodes: hyper.get("max_leaf_nodes").map(|_| hyper.count("max_leaf_nodes", 0)).transpose()?,
                ..TreeConfig::default()
            };
            fit_tree_with(x, y, &cfg, seed)?
        }
        ModelKind::Forest => {
            let frac = hyper.get_or("min_samples_split", 0.01);
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(RegressorError::Hyper { name: "min_samples_split".into(), value: frac });
            }
            let cfg = ForestConfig {
                n_estimators: hyper.count("n_estimators", 100)?,
                min_samples_split: frac,
                ..ForestConfig::default()
            };
            fit_forest(x, y, &cfg, seed)?
        }
        ModelKind::Itea => {
            let cfg = IteaConfig {
                popsize: hyper.count("popsize", 100)?,
                gens: hyper.count("gens", 100)?,
                ..IteaConfig::default()
            };
            fit_itea(x, y, &cfg, seed)?
        }
        ModelKind::GpNls => {
            let cfg = GpNlsConfig {
                population_size: hyper.count("population_size", 100)?,
                generations: hyper.count("generations", 100)?,
                ..GpNlsConfig::default()
            };
            fit_gpnls(x, y, &cfg, seed)?
        }
        ModelKind::Truth => return Err(RegressorError::Unknown("truth".into())),
    };
    model.meta.hyper = hyper.clone();
    model.meta.seed = seed;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells_are_cartesian() {
        let g = ModelKind::Tree.default_grid();
        let cells = g.cells();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells[0].get("max_depth"), Some(5.0));
        assert_eq!(cells[1].get("max_leaf_nodes"), Some(10.0));
        assert_eq!(ModelKind::Linear.default_grid().cells(), alloc::vec![HyperParams::new()]);
    }

    #[test]
    fn kind_ids_round_trip() {
        for k in ModelKind::REGRESSORS {
            assert_eq!(ModelKind::from_id(k.id()), Some(k));
        }
        assert_eq!(ModelKind::from_id("svm"), None);
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_prediction(1.0), (1.0, false));
        assert_eq!(clamp_prediction(f64::NAN), (PREDICTION_SENTINEL, true));
        assert_eq!(clamp_prediction(f64::NEG_INFINITY), (-PREDICTION_SENTINEL, true));
    }
}
