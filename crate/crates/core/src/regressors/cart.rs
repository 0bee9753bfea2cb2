use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_data, FittedModel, ModelBody, ModelKind, ModelMeta, RegressorError};
use crate::rng::{derive_seed, rng, Rng};
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    /// `ceil(d / 3)` features drawn at random for every split.
    Third,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeConfig {
    /// Maximum number of edges from the root to a leaf.
    pub max_depth: Option<usize>,
    pub max_leaf_nodes: Option<usize>,
    /// Smallest node that may be split (at least 2).
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, max_leaf_nodes: None, min_samples_split: 2, max_features: MaxFeatures::All }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A regression tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Candidate {
    gain: f64,
    seq: usize,
    node: usize,
    depth: usize,
    split: Split,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Candidate {
    // Largest gain first, then earliest created.
    fn cmp(&self, o: &Self) -> Ordering {
        self.gain.total_cmp(&o.gain).then(o.seq.cmp(&self.seq))
    }
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn best_split(x: &Matrix, y: &[f64], idx: &[usize], features: &[usize]) -> Option<Split> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let m = total / n as f64;
    let sse: f64 = idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum();
    if !(sse > 1e-12 * (1.0 + m * m) * n as f64) {
        return None;
    }
    let base = total * total / n as f64;
    let mut best: Option<(usize, f64, f64, usize)> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut pos = 0;
    for &f in features {
        order.clear();
        order.extend(idx.iter().map(|&i| (x[(i, f)], y[i])));
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = 0.0;
        for k in 0..n - 1 {
            left += order[k].1;
            if order[k].0 == order[k + 1].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let right = total - left;
            let gain = left * left / nl + right * right / nr - base;
            if best.is_none_or(|b| gain > b.1) {
                let mut thr = 0.5 * (order[k].0 + order[k + 1].0);
                if thr >= order[k + 1].0 {
                    thr = order[k].0;
                }
                best = Some((f, gain, thr, k + 1));
                pos = k + 1;
            }
        }
    }
    let _ = pos;
    let (feature, gain, threshold, _) = best?;
    if !(gain > 1e-12 * sse) {
        return None;
    }
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[(i, feature)] <= threshold);
    Some(Split { feature, threshold, gain, left, right })
}

fn pick_features(d: usize, mode: MaxFeatures, r: &mut Rng) -> Vec<usize> {
    match mode {
        MaxFeatures::All => (0..d).collect(),
        MaxFeatures::Third => {
            let k = d.div_ceil(3).max(1);
            let mut f = rand::seq::index::sample(r, d, k).into_vec();
            f.sort_unstable();
            f
        }
    }
}

/// Best-first CART growth on the rows `idx` (duplicates allowed).
fn grow(x: &Matrix, y: &[f64], idx: Vec<usize>, cfg: &TreeConfig, r: &mut Rng) -> Tree {
    let d = x.ncols();
    let mut nodes = alloc::vec![TreeNode::Leaf { value: mean(y, &idx) }];
    let max_leaves = cfg.max_leaf_nodes.unwrap_or(usize::MAX);
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut push = |heap: &mut BinaryHeap<Candidate>, node: usize, depth: usize, idx: &[usize], r: &mut Rng| {
        if idx.len() < cfg.min_samples_split.max(2) || cfg.max_depth.is_some_and(|m| depth >= m) {
            return;
        }
        let feats = pick_features(d, cfg.max_features, r);
        if let Some(split) = best_split(x, y, idx, &feats) {
            heap.push(Candidate { gain: split.gain, seq, node, depth, split });
            seq += 1;
        }
    };
    push(&mut heap, 0, 0, &idx, r);
    let mut leaves = 1;
    while leaves < max_leaves {
        let Some(c) = heap.pop() else { break };
        let l = nodes.len();
        nodes.push(TreeNode::Leaf { value: mean(y, &c.split.left) });
        nodes.push(TreeNode::Leaf { value: mean(y, &c.split.right) });
        nodes[c.node] = TreeNode::Split { feature: c.split.feature, threshold: c.split.threshold, left: l, right: l + 1 };
        leaves += 1;
        push(&mut heap, l, c.depth + 1, &c.split.left, r);
        push(&mut heap, l + 1, c.depth + 1, &c.split.right, r);
    }
    Tree { nodes }
}

pub fn fit_tree(
    x: &Matrix,
    y: &[f64],
    max_depth: usize,
    max_leaf_nodes: usize,
) -> Result<FittedModel, RegressorError> {
    let cfg = TreeConfig { max_depth: Some(max_depth), max_leaf_nodes: Some(max_leaf_nodes), ..TreeConfig::default() };
    fit_tree_with(x, y, &cfg, 0)
}

pub fn fit_tree_with(x: &Matrix, y: &[f64], cfg: &TreeConfig, seed: u64) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if cfg.max_leaf_nodes == Some(0) {
        return Err(RegressorError::Hyper { name: "max_leaf_nodes".into(), value: 0.0 });
    }
    let mut r = rng(seed);
    let tree = grow(x, y, (0..y.len()).collect(), cfg, &mut r);
    Ok(FittedModel::from_body(ModelKind::Tree, x.ncols(), ModelBody::Tree(tree), ModelMeta::default()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestConfig {
    pub n_estimators: usize,
    /// Fraction of the training rows a node needs before it may split.
    pub min_samples_split: f64,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_estimators: 100, min_samples_split: 0.01, bootstrap: true, max_features: MaxFeatures::Third }
    }
}

/// Bagged ensemble of regression trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], cfg: &ForestConfig, seed: u64) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if cfg.n_estimators == 0 {
        return Err(RegressorError::Hyper { name: "n_estimators".into(), value: 0.0 });
    }
    let n = y.len();
    let split = libm::ceil(cfg.min_samples_split * n as f64) as usize;
    let tcfg = TreeConfig { min_samples_split: split.max(2), max_features: cfg.max_features, ..TreeConfig::default() };
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for t in 0..cfg.n_estimators {
        let mut r = rng(derive_seed(seed, &["tree", &alloc::format!("{t}")]));
        let idx: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| r.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow(x, y, idx, &tcfg, &mut r));
    }
    let mut meta = ModelMeta::default();
    meta.info.insert("max_features".into(), alloc::format!("{:?}", cfg.max_features));
    Ok(FittedModel::from_body(ModelKind::Forest, x.ncols(), ModelBody::Forest(Forest { trees }), meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::Model;
    use alloc::vec;

    #[test]
    fn constant_target_gives_single_leaf() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let m = fit_tree(&x, &[5.0, 5.0, 5.0], 5, 5).unwrap();
        let ModelBody::Tree(t) = m.body() else { panic!() };
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(m.predict(&[9.0]), 5.0);
    }

    #[test]
    fn step_function_two_leaves() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v > 0.0 { 3.0 + v * 0.01 } else { -1.0 }).collect();
        let x = Matrix::from_vec(20, 1, xs.clone());
        let m = fit_tree(&x, &y, 5, 2).unwrap();
        let ModelBody::Tree(t) = m.body() else { panic!() };
        let TreeNode::Split { threshold, .. } = t.nodes[0] else { panic!() };
        assert_eq!(threshold, 0.0);
        assert_eq!(m.predict(&[-3.0]), -1.0);
        let right: f64 = y[10..].iter().sum::<f64>() / 10.0;
        assert!((m.predict(&[3.0]) - right).abs() < 1e-12);
    }

    #[test]
    fn single_unbagged_member_equals_tree() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![libm::sin(i as f64), libm::cos(i as f64 * 0.3)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[1] + r[0]).collect();
        let x = Matrix::from_rows(&rows);
        let cfg = ForestConfig { n_estimators: 1, bootstrap: false, max_features: MaxFeatures::All, min_samples_split: 0.01 };
        let f = fit_forest(&x, &y, &cfg, 3).unwrap();
        let t = fit_tree_with(&x, &y, &TreeConfig::default(), 0).unwrap();
        for r in x.rows() {
            assert_eq!(f.predict(r), t.predict(r));
        }
    }
}
