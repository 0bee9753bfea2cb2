use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::lm::{levenberg_marquardt, LmConfig};
use super::ptc2::{ptc2, terminal, Ptc2Config};
use super::tape::Tape;
use super::{check_data, FittedModel, ModelKind, ModelMeta, RegressorError};
use crate::expr::{ExprTree, Node};
use crate::rng::{rng, Rng};
use crate::Matrix;

/// Hard cap on Levenberg-Marquardt steps per fitness evaluation.
pub const MAX_LM_ITERATIONS: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct GpNlsConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament: usize,
    pub elitism: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub lm_iterations: usize,
    pub init: Ptc2Config,
}

impl Default for GpNlsConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 100,
            tournament: 3,
            elitism: 1,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            lm_iterations: MAX_LM_ITERATIONS,
            init: Ptc2Config::default(),
        }
    }
}

/// Adds a coefficient to every variable, turns every constant into a
/// parameter and wraps the result as `p0 * tree + p1`. Returns the expanded
/// tree and the starting parameter vector.
pub fn expand(tree: &Node) -> (ExprTree, Vec<f64>) {
    let mut theta = vec![1.0, 0.0];
    let body = tree.map_leaves(&mut |leaf| match leaf {
        Node::Var(_) => {
            theta.push(1.0);
            Node::mul(Node::Param(theta.len() - 1), leaf.clone())
        }
        Node::Const(c) => {
            theta.push(*c);
            Node::Param(theta.len() - 1)
        }
        other => other.clone(),
    });
    let root = Node::add(Node::mul(Node::Param(0), body), Node::Param(1));
    (ExprTree::new(root), theta)
}

#[derive(Clone)]
struct Individual {
    tree: Node,
    fitness: f64,
    params: Vec<f64>,
}

struct Evaluator<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    var: f64,
    lm: LmConfig,
}

impl Evaluator<'_> {
    /// Training NMSE after parameter fitting, with the fitted parameters.
    fn fitness(&self, tree: &Node) -> (f64, Vec<f64>) {
        let n = self.y.len();
        let (expanded, mut theta) = expand(tree);
        let mut tape = Tape::new(&expanded);
        // Scale and offset start from the least-squares line through the
        // unexpanded output.
        let mut r = vec![0.0; n];
        tape.residuals(self.x, self.y, &theta, &mut r, None);
        let t: Vec<f64> = r.iter().zip(self.y).map(|(ri, yi)| ri + yi).collect();
        if t.iter().all(|v| v.is_finite()) {
            let nf = n as f64;
            let tm = t.iter().sum::<f64>() / nf;
            let ym = self.y.iter().sum::<f64>() / nf;
            let stt: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
            let sty: f64 = t.iter().zip(self.y).map(|(a, b)| (a - tm) * (b - ym)).sum();
            let a = if stt > 0.0 { sty / stt } else { 0.0 };
            if a.is_finite() {
                theta[0] = a;
                theta[1] = ym - a * tm;
            }
        }
        let rep = levenberg_marquardt(&theta, n, &self.lm, |th, r, jac| tape.residuals(self.x, self.y, th, r, jac));
        let mse = rep.cost() / n as f64;
        let f = if self.var > 0.0 { mse / self.var } else { mse };
        (if f.is_finite() { f } else { f64::INFINITY }, rep.params)
    }
}

fn nth(n: &Node, k: &mut usize) -> Option<Node> {
    if *k == 0 {
        return Some(n.clone());
    }
    *k -= 1;
    match n {
        Node::Unary(_, a) => nth(a, k),
        Node::Binary(_, a, b) => nth(a, k).or_else(|| nth(b, k)),
        _ => None,
    }
}

fn replace(n: &Node, k: &mut usize, with: &mut Option<Node>) -> Node {
    if *k == 0 {
        *k = usize::MAX;
        return with.take().expect("replacement used twice");
    }
    if *k == usize::MAX {
        return n.clone();
    }
    *k -= 1;
    match n {
        Node::Unary(op, a) => Node::Unary(*op, Box::new(replace(a, k, with))),
        Node::Binary(op, a, b) => {
            let a = replace(a, k, with);
            Node::Binary(*op, Box::new(a), Box::new(replace(b, k, with)))
        }
        leaf => leaf.clone(),
    }
}

fn subtree(n: &Node, k: usize) -> Node {
    nth(n, &mut { k }).expect("index within tree")
}

fn put(n: &Node, k: usize, with: Node) -> Node {
    replace(n, &mut { k }, &mut Some(with))
}

fn point_mutation(n: &Node, dim: usize, cfg: &Ptc2Config, r: &mut Rng) -> Node {
    let k = r.random_range(0..n.size());
    let old = subtree(n, k);
    let fs = &cfg.functions;
    let new = match old {
        Node::Const(c) => {
            let s = Normal::new(0.0, 0.1 * (1.0 + c.abs())).expect("positive scale");
            Node::Const(c + s.sample(r))
        }
        Node::Var(_) | Node::Param(_) => terminal(dim, cfg, r),
        Node::Unary(_, a) => Node::Unary(fs.unary[r.random_range(0..fs.unary.len())], a),
        Node::Binary(_, a, b) => Node::Binary(fs.binary[r.random_range(0..fs.binary.len())], a, b),
    };
    put(n, k, new)
}

fn tournament(pop: &[Individual], size: usize, r: &mut Rng) -> usize {
    let mut best = r.random_range(0..pop.len());
    for _ in 1..size {
        let c = r.random_range(0..pop.len());
        if pop[c].fitness < pop[best].fitness {
            best = c;
        }
    }
    best
}

fn best_of(pop: &[Individual]) -> usize {
    let mut b = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness < pop[b].fitness {
            b = i;
        }
    }
    b
}

/// Genetic programming with nonlinear least-squares parameter fitting.
pub fn fit_gpnls(x: &Matrix, y: &[f64], cfg: &GpNlsConfig, seed: u64) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if cfg.population_size == 0 {
        return Err(RegressorError::Hyper { name: "population_size".into(), value: 0.0 });
    }
    if cfg.lm_iterations > MAX_LM_ITERATIONS {
        return Err(RegressorError::Hyper { name: "lm_iterations".into(), value: cfg.lm_iterations as f64 });
    }
    let d = x.ncols();
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - ym) * (v - ym)).sum::<f64>() / n;
    let ev = Evaluator { x, y, var, lm: LmConfig { max_iter: cfg.lm_iterations, ..LmConfig::default() } };
    let mut r = rng(seed);
    let make = |tree: Node| {
        let (fitness, params) = ev.fitness(&tree);
        Individual { tree, fitness, params }
    };
    let mut pop: Vec<Individual> = (0..cfg.population_size).map(|_| make(ptc2(d, &cfg.init, &mut r))).collect();
    let fits = |t: &Node| t.size() <= cfg.init.max_size && t.depth() <= cfg.init.max_depth;
    let mut small = cfg.init.clone();
    small.max_size = 15;
    small.max_depth = 5;
    for _ in 0..cfg.generations {
        let mut next: Vec<Individual> = Vec::with_capacity(pop.len());
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
        next.extend(order.iter().take(cfg.elitism.min(pop.len())).map(|&i| pop[i].clone()));
        while next.len() < pop.len() {
            let p1 = tournament(&pop, cfg.tournament, &mut r);
            let mut child = pop[p1].tree.clone();
            let mut changed = false;
            if r.random_bool(cfg.crossover_rate) {
                let p2 = tournament(&pop, cfg.tournament, &mut r);
                let donor = &pop[p2].tree;
                let piece = subtree(donor, r.random_range(0..donor.size()));
                child = put(&child, r.random_range(0..child.size()), piece);
                changed = true;
            }
            if r.random_bool(cfg.mutation_rate) {
                child = if r.random_bool(0.5) {
                    let piece = ptc2(d, &small, &mut r);
                    put(&child, r.random_range(0..child.size()), piece)
                } else {
                    point_mutation(&child, d, &cfg.init, &mut r)
                };
                changed = true;
            }
            if !changed || !fits(&child) || child == pop[p1].tree {
                next.push(pop[p1].clone());
            } else {
                next.push(make(child));
            }
        }
        pop = next;
    }
    let best = &pop[best_of(&pop)];
    let mut meta = ModelMeta::default();
    meta.info.insert("selection".into(), alloc::format!("tournament({}) elitism({})", cfg.tournament, cfg.elitism));
    meta.info.insert("lm_iterations".into(), cfg.lm_iterations.to_string());
    meta.info.insert("train_nmse".into(), alloc::format!("{}", best.fitness));
    let (expanded, _) = expand(&best.tree);
    let form = if best.fitness.is_finite() {
        expanded.bind_params(&best.params)?
    } else {
        meta.flags.push("degenerate_population".to_string());
        ExprTree::constant(ym)
    };
    Ok(FittedModel::from_expr(ModelKind::GpNls, d, form, meta)?)
}
