//! Ground-truth equations and synthetic data generation.

mod manifest;
mod sampling;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprError, ExprTree, Program};
use crate::rng::derive_seed;
use crate::Matrix;

pub use manifest::{parse_manifest, parse_sampler, registry, BUNDLED_MANIFEST};
pub use sampling::{grid_points, latin_hypercube, sample_grid, sample_uniform, DEFAULT_GRID_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("manifest line {line}, column {column}: {msg}")]
    Manifest { line: usize, column: usize, msg: String },
    #[error("invalid feature space: {0}")]
    Space(String),
    #[error("invalid sampler: {0}")]
    Sampler(String),
    #[error("grid of {size} points exceeds the cap of {cap}")]
    GridCap { size: usize, cap: usize },
    #[error("{name}: {rejected} of {attempted} candidate rows had non-finite targets")]
    Starvation { name: String, rejected: usize, attempted: usize },
    #[error("unknown dataset `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Named features with per-feature bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl FeatureSpace {
    pub fn new(names: &[&str], lower: &[f64], upper: &[f64]) -> Result<Self, DatasetError> {
        Self::from_parts(names.iter().map(|s| s.to_string()).collect(), lower.to_vec(), upper.to_vec())
    }

    pub fn from_parts(
        names: Vec<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if names.len() != lower.len() || names.len() != upper.len() {
            return Err(DatasetError::Space("names and bounds differ in length".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(DatasetError::Space(format!(
                    "feature `{}` has bounds [{lo}, {hi}]",
                    names[i]
                )));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(DatasetError::Space(format!("duplicate feature name `{n}`")));
            }
        }
        Ok(Self { names, lower, upper })
    }

    /// Same names, uniform bounds on every feature.
    pub fn with_bounds(&self, lo: f64, hi: f64) -> Result<Self, DatasetError> {
        let d = self.dim();
        Self::from_parts(self.names.clone(), alloc::vec![lo; d], alloc::vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn name_refs(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }
}

/// How rows are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    /// `n` i.i.d. uniform rows; `bounds` overrides the per-feature bounds
    /// with one interval shared by all features.
    Uniform { n: usize, bounds: Option<(f64, f64)> },
    /// Endpoint-inclusive evenly spaced grid, Cartesian product over features.
    Grid { start: f64, stop: f64, step: f64 },
    /// Latin hypercube over the observed training min/max.
    LatinHypercube { n: usize },
}

impl core::fmt::Display for Sampler {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Sampler::Uniform { n, bounds: Some((lo, hi)) } => write!(f, "U({lo}, {hi}, {n})"),
            Sampler::Uniform { n, bounds: None } => write!(f, "U({n})"),
            Sampler::Grid { start, stop, step } => write!(f, "E({start}, {stop}, {step})"),
            Sampler::LatinHypercube { n } => write!(f, "LHS({n})"),
        }
    }
}

/// A generating equation with its domain and sampling protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub name: String,
    pub tree: ExprTree,
    pub space: FeatureSpace,
    pub train: Sampler,
    pub test: Sampler,
}

/// Observations drawn from a ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// The region the rows were drawn from.
    pub space: FeatureSpace,
    pub source: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateOptions {
    /// Largest full Cartesian grid materialized.
    pub grid_cap: usize,
    /// Rows kept when a grid exceeds the cap.
    pub grid_subsample: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { grid_cap: DEFAULT_GRID_CAP, grid_subsample: 1000 }
    }
}

/// Draws the train and test sets of `gt`. Deterministic given `seed`.
pub fn generate(gt: &GroundTruth, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    generate_with(gt, seed, &GenerateOptions::default())
}

pub fn generate_with(
    gt: &GroundTruth,
    seed: u64,
    opts: &GenerateOptions,
) -> Result<(Dataset, Dataset), DatasetError> {
    if gt.tree.min_dim() > gt.space.dim() {
        return Err(ExprError::VariableOutOfRange {
            index: gt.tree.min_dim() - 1,
            dim: gt.space.dim(),
        }
        .into());
    }
    let prog = gt.tree.compile();
    let train_seed = derive_seed(seed, &[&gt.name, "train"]);
    let train = draw(gt, &prog, &gt.train, train_seed, None, opts)?;
    let bounds = train.x.column_bounds();
    let test_seed = derive_seed(seed, &[&gt.name, "test"]);
    let test = draw(gt, &prog, &gt.test, test_seed, Some(&bounds), opts)?;
    Ok((train, test))
}

fn starvation(gt: &GroundTruth, rejected: usize, attempted: usize) -> DatasetError {
    DatasetError::Starvation { name: gt.name.clone(), rejected, attempted }
}

fn draw(
    gt: &GroundTruth,
    prog: &Program,
    sampler: &Sampler,
    seed: u64,
    train_bounds: Option<&[(f64, f64)]>,
    opts: &GenerateOptions,
) -> Result<Dataset, DatasetError> {
    let d = gt.space.dim();
    let (x, y, space) = match *sampler {
        Sampler::Uniform { n, bounds } => {
            let space = match bounds {
                Some((lo, hi)) => gt.space.with_bounds(lo, hi)?,
                None => gt.space.clone(),
            };
            let mut x = Matrix::empty(d);
            let mut y = Vec::with_capacity(n);
            let mut attempted = 0usize;
            let mut rejected = 0usize;
            let mut round = 0u64;
            while y.len() < n {
                let need = n - y.len();
                let batch = sample_uniform(&space, need, derive_seed(seed, &[&round.to_string()]));
                let vals = prog.eval_batch_strict(&batch, &[])?;
                for (row, v) in batch.rows().zip(vals) {
                    attempted += 1;
                    if v.is_finite() {
                        x.push_row(row);
                        y.push(v);
                    } else {
                        rejected += 1;
                    }
                }
                if rejected * 2 > attempted {
                    return Err(starvation(gt, rejected, attempted));
                }
                round += 1;
            }
            (x, y, space)
        }
        Sampler::Grid { start, stop, step } => {
            let space = gt.space.with_bounds(start, stop)?;
            // Over the cap, a random subset of lattice points is drawn in
            // random order and the first `grid_subsample` defined rows kept.
            let (candidates, limit) = match sample_grid(start, stop, step, d, opts.grid_cap) {
                Ok(m) => (m, usize::MAX),
                Err(DatasetError::GridCap { .. }) => {
                    let k = opts.grid_subsample;
                    (sampling::grid_subsample(start, stop, step, d, 2 * k, seed)?, k)
                }
                Err(e) => return Err(e),
            };
            let vals = prog.eval_batch_strict(&candidates, &[])?;
            let mut x = Matrix::empty(d);
            let mut y = Vec::with_capacity(vals.len().min(limit));
            let mut examined = 0;
            for (row, v) in candidates.rows().zip(&vals) {
                if y.len() == limit {
                    break;
                }
                examined += 1;
                if v.is_finite() {
                    x.push_row(row);
                    y.push(*v);
                }
            }
            let vals = &vals[..examined];
            let rejected = vals.len() - y.len();
            if rejected * 2 > vals.len() {
                return Err(starvation(gt, rejected, vals.len()));
            }
            (x, y, space)
        }
        Sampler::LatinHypercube { n } => {
            let (lo, hi): (Vec<f64>, Vec<f64>) = match train_bounds {
                Some(b) => b.iter().copied().unzip(),
                None => (gt.space.lower.clone(), gt.space.upper.clone()),
            };
            let space = FeatureSpace::from_parts(gt.space.names.clone(), lo, hi)?;
            let mut attempt = 0usize;
            loop {
                let x = latin_hypercube(&space, n, derive_seed(seed, &[&attempt.to_string()]));
                let y = prog.eval_batch_strict(&x, &[])?;
                if y.iter().all(|v| v.is_finite()) {
                    break (x, y, space);
                }
                attempt += 1;
                if attempt >= 20 {
                    return Err(starvation(gt, attempt, attempt));
                }
            }
        }
    };
    Ok(Dataset { x, y, space, source: gt.name.clone(), seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_space_validation() {
        assert!(FeatureSpace::new(&["a", "b"], &[0.0, 0.0], &[1.0, 1.0]).is_ok());
        assert!(FeatureSpace::new(&["a", "a"], &[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(FeatureSpace::new(&["a"], &[1.0], &[1.0]).is_err());
        assert!(FeatureSpace::new(&["a"], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn sampler_display_round_trips() {
        for s in ["U(-50, 10, 1000)", "U(30)", "E(-5, 5, 0.01)", "LHS(30)"] {
            let parsed = parse_sampler(s).unwrap();
            assert_eq!(parsed.to_string(), s);
        }
    }

    fn gt(name: &str) -> GroundTruth {
        registry().into_iter().find(|g| g.name == name).unwrap()
    }

    #[test]
    fn pagie_train_is_subsampled_and_finite() {
        let (train, test) = generate(&gt("pagie-1"), 11).unwrap();
        assert_eq!(train.len(), 1000);
        assert!(train.y.iter().all(|v| v.is_finite()));
        assert_eq!(test.len(), 100 * 100);
        assert!(train.x.as_slice().iter().chain(test.x.as_slice()).all(|v| *v != 0.0));
        assert!(train.x.rows().all(|r| train.space.contains(r)));
    }

    #[test]
    fn korns_sizes_and_determinism() {
        let g = gt("korns-11");
        let (a, b) = generate(&g, 5).unwrap();
        assert_eq!((a.len(), b.len()), (1000, 100));
        assert_eq!(generate(&g, 5).unwrap(), (a.clone(), b));
        assert_ne!(generate(&g, 6).unwrap().0, a);
    }

    #[test]
    fn lhs_test_uses_training_range() {
        let (train, test) = generate(&gt("feynman-I.12.1"), 2).unwrap();
        assert_eq!(test.len(), 30);
        let b = train.x.column_bounds();
        for j in 0..2 {
            assert_eq!((test.space.lower[j], test.space.upper[j]), b[j]);
        }
    }

    #[test]
    fn starvation_is_reported() {
        let g = parse_manifest("bad | log(x) | x:-2:-1 | U(50) | U(5)").unwrap();
        assert!(matches!(generate(&g[0], 1), Err(DatasetError::Starvation { .. })));
    }
}
