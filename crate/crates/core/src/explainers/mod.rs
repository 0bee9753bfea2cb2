//! Feature-importance explainers behind one local/global contract.
//!
//! Each method is also exposed as a plain function; [`explain`] dispatches
//! on [`ExplainerKind`] and [`Scope`] and checks compatibility.

mod ela;
mod ig;
mod lime;
mod morris;
mod pe;
mod permutation;
mod random;
mod sage;
mod shap;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regressors::Model;
use crate::rng::{derive_seed, seed_for_point};
use crate::Matrix;

pub use ela::ela_local;
pub use ig::{ig_local, Baseline};
pub use lime::lime_local;
pub use morris::{morris_global, MorrisResult};
pub use pe::{pe_global, pe_local};
pub use permutation::permutation_global;
pub use random::random_ranks;
pub use sage::{mutual_information, sage_global, SageResult};
pub use shap::{coalition_values, shap_global, shap_local};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("{explainer} does not support {scope} explanations")]
    Scope { explainer: ExplainerKind, scope: Scope },
    #[error("{0} needs a model with a symbolic form")]
    NotSymbolic(ExplainerKind),
    #[error("point has {got} features, model expects {want}")]
    Dimension { got: usize, want: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("explanation contains non-finite values")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Global,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Local => "local",
            Scope::Global => "global",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainerKind {
    Permutation,
    Lime,
    Ela,
    Shap,
    Sage,
    Morris,
    Ig,
    Pe,
    Random,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 9] = [
        ExplainerKind::Permutation,
        ExplainerKind::Lime,
        ExplainerKind::Ela,
        ExplainerKind::Shap,
        ExplainerKind::Sage,
        ExplainerKind::Morris,
        ExplainerKind::Ig,
        ExplainerKind::Pe,
        ExplainerKind::Random,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExplainerKind::Permutation => "permutation",
            ExplainerKind::Lime => "lime",
            ExplainerKind::Ela => "ela",
            ExplainerKind::Shap => "shap",
            ExplainerKind::Sage => "sage",
            ExplainerKind::Morris => "morris",
            ExplainerKind::Ig => "ig",
            ExplainerKind::Pe => "pe",
            ExplainerKind::Random => "random",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.id() == id)
    }

    pub fn supports(self, scope: Scope) -> bool {
        match self {
            ExplainerKind::Permutation | ExplainerKind::Sage | ExplainerKind::Morris => scope == Scope::Global,
            ExplainerKind::Lime | ExplainerKind::Ela | ExplainerKind::Ig => scope == Scope::Local,
            ExplainerKind::Shap | ExplainerKind::Pe | ExplainerKind::Random => true,
        }
    }

    /// Model-specific methods that need a symbolic form.
    pub fn needs_symbolic(self) -> bool {
        self == ExplainerKind::Pe
    }

    pub fn is_baseline(self) -> bool {
        self == ExplainerKind::Random
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Tuning knobs shared by all explainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    pub permutation_repeats: usize,
    /// Largest dimension for exact coalition enumeration (SHAP and SAGE).
    pub shap_cutoff: usize,
    /// Permutations sampled above the cutoff.
    pub shap_samples: usize,
    pub lime_samples: usize,
    /// Kernel width; `None` means `0.75 * sqrt(d)`.
    pub lime_width: Option<f64>,
    /// Neighbors for ELA; `None` means `max(30, d + 1)`.
    pub ela_k: Option<usize>,
    pub morris_trajectories: usize,
    pub morris_levels: usize,
    pub ig_steps: usize,
    pub ig_baseline: Baseline,
    pub sage_bins: usize,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            permutation_repeats: 10,
            shap_cutoff: 10,
            shap_samples: 256,
            lime_samples: 500,
            lime_width: None,
            ela_k: None,
            morris_trajectories: 50,
            morris_levels: 8,
            ig_steps: 128,
            ig_baseline: Baseline::Mean,
            sage_bins: 16,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        let counts = [
            ("permutation_repeats", self.permutation_repeats),
            ("shap_samples", self.shap_samples),
            ("lime_samples", self.lime_samples),
            ("morris_trajectories", self.morris_trajectories),
            ("sage_bins", self.sage_bins),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ExplainError::Config(alloc::format!("{name} must be at least 1")));
            }
        }
        if self.shap_cutoff > 20 {
            return Err(ExplainError::Config("shap_cutoff must be at most 20".into()));
        }
        if self.morris_levels < 2 {
            return Err(ExplainError::Config("morris_levels must be at least 2".into()));
        }
        if self.ig_steps < 2 {
            return Err(ExplainError::Config("ig_steps must be at least 2".into()));
        }
        if self.ela_k == Some(0) {
            return Err(ExplainError::Config("ela_k must be at least 1".into()));
        }
        if self.lime_width.is_some_and(|w| !(w > 0.0)) {
            return Err(ExplainError::Config("lime_width must be positive".into()));
        }
        Ok(())
    }
}

/// A d-vector of importances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub explainer: ExplainerKind,
    pub scope: Scope,
    pub values: Vec<f64>,
    /// Degenerate conditions met while explaining, e.g. `rank_deficient`.
    pub flags: Vec<String>,
    /// Secondary vectors, e.g. the opposite SAGE sign or Morris mean |EE|.
    pub aux: BTreeMap<String, Vec<f64>>,
}

impl Explanation {
    fn new(explainer: ExplainerKind, scope: Scope, values: Vec<f64>) -> Self {
        Self { explainer, scope, values, flags: Vec::new(), aux: BTreeMap::new() }
    }
}

/// Training data an explainer may consult.
#[derive(Clone, Copy, Debug)]
pub struct Background<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
}

/// Runs `kind` in `scope`. Local explanations need `point`; their random
/// draws are seeded from `seed` and the point itself, so the same point
/// always gets the same explanation.
pub fn explain(
    kind: ExplainerKind,
    scope: Scope,
    model: &dyn Model,
    data: Background<'_>,
    point: Option<&[f64]>,
    cfg: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    cfg.validate()?;
    if !kind.supports(scope) {
        return Err(ExplainError::Scope { explainer: kind, scope });
    }
    let d = model.dim();
    if data.x.ncols() != d {
        return Err(ExplainError::Dimension { got: data.x.ncols(), want: d });
    }
    let seed = derive_seed(seed, &[kind.id(), if scope == Scope::Local { "local" } else { "global" }]);
    let mut out = match scope {
        Scope::Local => {
            let x = point.ok_or_else(|| ExplainError::Config("local explanation without a point".into()))?;
            if x.len() != d {
                return Err(ExplainError::Dimension { got: x.len(), want: d });
            }
            let ps = seed_for_point(seed, x);
            match kind {
                ExplainerKind::Lime => {
                    let (v, degenerate) = lime_local(model, data.x, x, cfg.lime_samples, cfg.lime_width, ps);
                    flagged(kind, scope, v, degenerate)
                }
                ExplainerKind::Ela => {
                    let k = cfg.ela_k.unwrap_or(30.max(d + 1)).min(data.x.nrows());
                    let (v, degenerate) = ela_local(model, data.x, x, k);
                    flagged(kind, scope, v, degenerate)
                }
                ExplainerKind::Shap => {
                    let means = data.x.column_means();
                    let v = shap_local(model, &means, x, cfg.shap_cutoff, cfg.shap_samples, ps);
                    Explanation::new(kind, scope, v)
                }
                ExplainerKind::Ig => {
                    let base = cfg.ig_baseline.resolve(data.x);
                    Explanation::new(kind, scope, ig_local(model, &base, x, cfg.ig_steps))
                }
                ExplainerKind::Pe => Explanation::new(kind, scope, pe_local(model, x)?),
                ExplainerKind::Random => Explanation::new(kind, scope, random_ranks(d, ps)),
                _ => unreachable!("scope checked above"),
            }
        }
        Scope::Global => match kind {
            ExplainerKind::Permutation => {
                let v = permutation_global(model, data.x, data.y, cfg.permutation_repeats, seed);
                Explanation::new(kind, scope, v)
            }
            ExplainerKind::Shap => {
                Explanation::new(kind, scope, shap_global(model, data.x, cfg.shap_cutoff, cfg.shap_samples, seed))
            }
            ExplainerKind::Sage => {
                let r = sage_global(model, data.x, data.y, cfg.shap_cutoff, cfg.shap_samples, cfg.sage_bins, seed);
                let mut e = Explanation::new(kind, scope, r.values);
                e.aux.insert("printed_sign".into(), r.printed_sign);
                e
            }
            ExplainerKind::Morris => {
                let r = morris_global(model, data.x, cfg.morris_trajectories, cfg.morris_levels, seed);
                let mut e = Explanation::new(kind, scope, r.mu);
                e.aux.insert("mu_star".into(), r.mu_star);
                e
            }
            ExplainerKind::Pe => Explanation::new(kind, scope, pe_global(model, data.x)?),
            ExplainerKind::Random => Explanation::new(kind, scope, random_ranks(d, seed)),
            _ => unreachable!("scope checked above"),
        },
    };
    if out.values.iter().any(|v| !v.is_finite()) {
        out.flags.push("non_finite".into());
        return Err(ExplainError::NonFinite);
    }
    out.flags.sort();
    Ok(out)
}

fn flagged(kind: ExplainerKind, scope: Scope, values: Vec<f64>, degenerate: bool) -> Explanation {
    let mut e = Explanation::new(kind, scope, values);
    if degenerate {
        e.flags.push("rank_deficient".into());
    }
    e
}

/// Model predictions with every feature outside `keep` replaced by `fill`.
pub(crate) fn masked_predictions(model: &dyn Model, x: &Matrix, fill: &[f64], keep: &[bool]) -> Vec<f64> {
    let mut z = x.clone();
    for i in 0..z.nrows() {
        for (j, k) in keep.iter().enumerate() {
            if !k {
                z[(i, j)] = fill[j];
            }
        }
    }
    model.predict_batch(&z)
}

/// Shapley weight `|S|! (d - |S| - 1)! / d!` for every coalition size.
pub(crate) fn shapley_weights(d: usize) -> Vec<f64> {
    let mut f = alloc::vec![1.0f64; d + 1];
    for i in 1..=d {
        f[i] = f[i - 1] * i as f64;
    }
    (0..d).map(|s| f[s] * f[d - s - 1] / f[d]).collect()
}

/// Shapley values of a set function given on all `2^d` coalitions
/// (bit `j` of the index set when feature `j` is present).
pub(crate) fn shapley_from_table(v: &[f64], d: usize) -> Vec<f64> {
    let w = shapley_weights(d);
    let mut phi = alloc::vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for s in 0..v.len() {
            if s & bit == 0 {
                *p += w[s.count_ones() as usize] * (v[s | bit] - v[s]);
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_table() {
        use ExplainerKind::*;
        for k in [Permutation, Sage, Morris] {
            assert!(k.supports(Scope::Global) && !k.supports(Scope::Local));
        }
        for k in [Lime, Ela, Ig] {
            assert!(!k.supports(Scope::Global) && k.supports(Scope::Local));
        }
        for k in [Shap, Pe, Random] {
            assert!(k.supports(Scope::Global) && k.supports(Scope::Local));
        }
        for k in ExplainerKind::ALL {
            assert_eq!(ExplainerKind::from_id(k.id()), Some(k));
        }
    }

    #[test]
    fn weights_sum_per_feature() {
        for d in 1..8usize {
            let w = shapley_weights(d);
            let total: f64 = (0..d).map(|s| w[s] * binomial(d - 1, s)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }
}
