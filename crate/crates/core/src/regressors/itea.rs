use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{check_data, FittedModel, ModelKind, ModelMeta, RegressorError};
use crate::expr::{powi, ItExpression, ItTerm, Unary};
use crate::linalg::affine_fit;
use crate::rng::{rng, Rng};
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct IteaConfig {
    pub popsize: usize,
    pub gens: usize,
    /// Largest absolute strength.
    pub max_strength: i32,
    pub max_terms: usize,
    /// Upper bound on terms in the initial population.
    pub init_terms: usize,
    pub transforms: Vec<Unary>,
}

impl Default for IteaConfig {
    fn default() -> Self {
        Self {
            popsize: 100,
            gens: 100,
            max_strength: 3,
            max_terms: 10,
            init_terms: 4,
            transforms: crate::expr::FunctionSet::itea().unary,
        }
    }
}

type Term = (Unary, Vec<i32>);

#[derive(Clone, Debug)]
struct Individual {
    terms: Vec<Term>,
    fitness: f64,
    expr: Option<ItExpression>,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    var: f64,
    bounds: Vec<(f64, f64)>,
}

fn mul_iv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (p.iter().copied().fold(f64::INFINITY, f64::min), p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn pow_iv((lo, hi): (f64, f64), k: u32) -> (f64, f64) {
    let (a, b) = (powi(lo, k as i32), powi(hi, k as i32));
    if k % 2 == 1 {
        (a, b)
    } else if lo <= 0.0 && hi >= 0.0 {
        (0.0, a.max(b))
    } else {
        (a.min(b), a.max(b))
    }
}

/// Whether a term is defined on the whole box `bounds`, by interval
/// arithmetic on the interaction and the transformation's domain.
fn defined_on(g: Unary, k: &[i32], bounds: &[(f64, f64)]) -> bool {
    let mut acc = (1.0, 1.0);
    for (&s, &b) in k.iter().zip(bounds) {
        if s == 0 {
            continue;
        }
        let mut f = pow_iv(b, s.unsigned_abs());
        if s < 0 {
            if f.0 <= 0.0 && f.1 >= 0.0 {
                return false;
            }
            f = (1.0 / f.1, 1.0 / f.0);
        }
        acc = mul_iv(acc, f);
    }
    if !acc.0.is_finite() || !acc.1.is_finite() {
        return false;
    }
    match g {
        Unary::Log => acc.0 > 0.0,
        Unary::Sqrt => acc.0 >= 0.0,
        Unary::Asin => acc.0 >= -1.0 && acc.1 <= 1.0,
        _ => true,
    }
}

impl Problem<'_> {
    /// Least-squares coefficients for the terms that are defined on the
    /// training box and finite on the training data, and the resulting NMSE.
    fn evaluate(&self, terms: &[Term]) -> (f64, Option<ItExpression>) {
        let n = self.y.len();
        let mut kept: Vec<ItTerm> = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (g, k) in terms {
            if !defined_on(*g, k, &self.bounds) {
                continue;
            }
            let t = ItTerm { transform: *g, strengths: k.clone(), coef: 1.0 };
            let c = t.column(self.x);
            if c.iter().all(|v| v.is_finite()) {
                kept.push(t);
                cols.push(c);
            }
        }
        // Terms whose largest training contribution is negligible are
        // dropped and the rest refitted.
        let floor = 1e-6 * libm::sqrt(self.var).max(1e-6);
        let fit = loop {
            if kept.is_empty() {
                return (f64::INFINITY, None);
            }
            let mut a = Matrix::zeros(n, kept.len());
            for (j, c) in cols.iter().enumerate() {
                for (i, v) in c.iter().enumerate() {
                    a[(i, j)] = *v;
                }
            }
            let Ok(fit) = affine_fit(&a, self.y, None) else {
                return (f64::INFINITY, None);
            };
            let keep: Vec<bool> = cols
                .iter()
                .zip(&fit.coef)
                .map(|(c, b)| c.iter().any(|v| (b * v).abs() >= floor))
                .collect();
            if keep.iter().all(|k| *k) {
                break fit;
            }
            let mut it = keep.iter();
            kept.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            cols.retain(|_| *it.next().unwrap());
        };
        for (t, b) in kept.iter_mut().zip(&fit.coef) {
            t.coef = *b;
        }
        let expr = ItExpression::new(fit.intercept, kept);
        let mut sse = 0.0;
        for (i, yi) in self.y.iter().enumerate() {
            let mut p = expr.intercept;
            for (t, c) in expr.terms.iter().zip(&cols) {
                p += t.coef * c[i];
            }
            sse += (p - yi) * (p - yi);
        }
        let mse = sse / n as f64;
        let f = if self.var > 0.0 { mse / self.var } else { mse };
        if f.is_finite() {
            (f, Some(expr))
        } else {
            (f64::INFINITY, None)
        }
    }

    fn individual(&self, terms: Vec<Term>) -> Individual {
        let (fitness, expr) = self.evaluate(&terms);
        let terms = match &expr {
            Some(e) => e.terms.iter().map(|t| (t.transform, t.strengths.clone())).collect(),
            None => terms,
        };
        Individual { terms, fitness, expr }
    }
}

struct Generator<'a> {
    cfg: &'a IteaConfig,
    dim: usize,
}

impl Generator<'_> {
    fn strength(&self, r: &mut Rng) -> i32 {
        let u: f64 = r.random();
        let m = if u < 0.5 {
            1
        } else if u < 0.8 {
            2
        } else {
            3
        };
        let m = m.min(self.cfg.max_strength);
        if r.random_bool(0.3) {
            -m
        } else {
            m
        }
    }

    fn term(&self, r: &mut Rng) -> Term {
        let g = self.cfg.transforms[r.random_range(0..self.cfg.transforms.len())];
        let mut k = vec![0; self.dim];
        for v in k.iter_mut() {
            if r.random_bool(0.5) {
                *v = self.strength(r);
            }
        }
        if k.iter().all(|v| *v == 0) {
            let j = r.random_range(0..self.dim);
            k[j] = self.strength(r);
        }
        (g, k)
    }

    fn push_unique(&self, terms: &mut Vec<Term>, t: Term) -> bool {
        if t.1.iter().all(|v| *v == 0) || terms.contains(&t) || terms.len() >= self.cfg.max_terms {
            return false;
        }
        terms.push(t);
        true
    }

    fn random(&self, r: &mut Rng) -> Vec<Term> {
        let want = r.random_range(1..=self.cfg.init_terms.clamp(1, self.cfg.max_terms));
        let mut terms = Vec::with_capacity(want);
        let mut tries = 0;
        while terms.len() < want && tries < 10 * want {
            let t = self.term(r);
            self.push_unique(&mut terms, t);
            tries += 1;
        }
        if terms.is_empty() {
            terms.push(self.term(r));
        }
        terms
    }

    fn expand(&self, terms: &mut Vec<Term>, r: &mut Rng) {
        if terms.len() >= 2 && r.random_bool(0.5) {
            let i = r.random_range(0..terms.len());
            let mut j = r.random_range(0..terms.len() - 1);
            if j >= i {
                j += 1;
            }
            let sign = if r.random_bool(0.5) { 1 } else { -1 };
            let b = self.cfg.max_strength;
            let k: Vec<i32> = terms[i].1.iter().zip(&terms[j].1).map(|(a, c)| (a + sign * c).clamp(-b, b)).collect();
            let g = if r.random_bool(0.5) { terms[i].0 } else { terms[j].0 };
            if self.push_unique(terms, (g, k)) {
                return;
            }
        }
        for _ in 0..10 {
            let t = self.term(r);
            if self.push_unique(terms, t) {
                return;
            }
        }
    }

    fn local(&self, terms: &mut [Term], r: &mut Rng) {
        let i = r.random_range(0..terms.len());
        let j = r.random_range(0..self.dim);
        let b = self.cfg.max_strength;
        for _ in 0..10 {
            let v = r.random_range(-b..=b);
            let mut k = terms[i].1.clone();
            k[j] = v;
            if v != terms[i].1[j] && k.iter().any(|s| *s != 0) && !terms.iter().any(|t| t.0 == terms[i].0 && t.1 == k) {
                terms[i].1 = k;
                return;
            }
        }
    }

    fn mutate(&self, parent: &[Term], r: &mut Rng) -> Vec<Term> {
        let mut terms = parent.to_vec();
        let mut ops = Vec::with_capacity(3);
        if terms.len() < self.cfg.max_terms {
            ops.push(0);
        }
        if terms.len() > 1 {
            ops.push(1);
        }
        ops.push(2);
        match ops[r.random_range(0..ops.len())] {
            0 => self.expand(&mut terms, r),
            1 => {
                let i = r.random_range(0..terms.len());
                terms.remove(i);
            }
            _ => self.local(&mut terms, r),
        }
        terms
    }
}

/// Best training NMSE after every generation, followed by the best model.
fn evolve(x: &Matrix, y: &[f64], cfg: &IteaConfig, seed: u64) -> (Vec<f64>, Individual) {
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - ym) * (v - ym)).sum::<f64>() / n;
    let prob = Problem { x, y, var, bounds: x.column_bounds() };
    let gen = Generator { cfg, dim: x.ncols() };
    let mut r = rng(seed);
    let mut pop: Vec<Individual> = (0..cfg.popsize).map(|_| prob.individual(gen.random(&mut r))).collect();
    let best = |pop: &[Individual]| {
        pop.iter().enumerate().fold(0, |b, (i, p)| if p.fitness < pop[b].fitness { i } else { b })
    };
    let mut history = Vec::with_capacity(cfg.gens + 1);
    history.push(pop[best(&pop)].fitness);
    for _ in 0..cfg.gens {
        for slot in pop.iter_mut() {
            let child = prob.individual(gen.mutate(&slot.terms, &mut r));
            if child.fitness <= slot.fitness {
                *slot = child;
            }
        }
        history.push(pop[best(&pop)].fitness);
    }
    let b = best(&pop);
    (history, pop.swap_remove(b))
}

/// Interaction-transformation evolutionary algorithm.
pub fn fit_itea(x: &Matrix, y: &[f64], cfg: &IteaConfig, seed: u64) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    if cfg.popsize == 0 {
        return Err(RegressorError::Hyper { name: "popsize".into(), value: 0.0 });
    }
    if cfg.max_terms == 0 || cfg.transforms.is_empty() || !(1..=12).contains(&cfg.max_strength) {
        return Err(RegressorError::Hyper { name: "max_terms".into(), value: cfg.max_terms as f64 });
    }
    let d = x.ncols();
    let (history, best) = evolve(x, y, cfg, seed);
    let mut meta = ModelMeta::default();
    meta.info.insert("selection".into(), "parent-vs-mutant (mu+lambda)".into());
    meta.info.insert("train_nmse".into(), alloc::format!("{}", history.last().copied().unwrap_or(f64::NAN)));
    let expr = match best.expr {
        Some(e) => e,
        None => {
            meta.flags.push("degenerate_population".to_string());
            let terms = (0..d)
                .map(|j| {
                    let mut k = vec![0; d];
                    k[j] = 1;
                    (Unary::Id, k)
                })
                .collect::<Vec<_>>();
            let prob = Problem { x, y, var: 0.0, bounds: x.column_bounds() };
            prob.evaluate(&terms).1.unwrap_or_else(|| ItExpression::new(0.0, Vec::new()))
        }
    };
    let form = expr.to_tree();
    meta.it = Some(expr);
    Ok(FittedModel::from_expr(ModelKind::Itea, d, form, meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::Model;

    fn cosine() -> (Matrix, Vec<f64>) {
        let xs: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        let y = xs.iter().map(|v| libm::cos(*v)).collect();
        (Matrix::from_vec(100, 1, xs), y)
    }

    #[test]
    fn best_fitness_never_increases() {
        let (x, y) = cosine();
        let cfg = IteaConfig { popsize: 20, gens: 30, ..IteaConfig::default() };
        let (h, _) = evolve(&x, &y, &cfg, 4);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_cosine() {
        let (x, y) = cosine();
        let cfg = IteaConfig::default();
        let ok = (0..5).any(|s| {
            let m = fit_itea(&x, &y, &cfg, s).unwrap();
            let p = m.predict_batch(&x);
            let nmse = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 100.0
                / (y.iter().map(|v| v * v).sum::<f64>() / 100.0 - libm::pow(y.iter().sum::<f64>() / 100.0, 2.0));
            nmse < 1e-6
        });
        assert!(ok);
    }

    #[test]
    fn interval_domain_check() {
        let b = [(-1.0, 2.0), (0.5, 3.0)];
        assert!(!defined_on(Unary::Id, &[-1, 0], &b));
        assert!(defined_on(Unary::Id, &[0, -2], &b));
        assert!(defined_on(Unary::Log, &[2, 1], &[(1.0, 2.0), (0.5, 3.0)]));
        assert!(!defined_on(Unary::Log, &[2, 1], &b));
        assert!(defined_on(Unary::Sqrt, &[2, 0], &b));
        assert!(!defined_on(Unary::Asin, &[0, 1], &b));
        assert!(defined_on(Unary::Asin, &[0, -1], &[(0.0, 1.0), (1.0, 3.0)]));
    }

    #[test]
    fn bounds_hold() {
        let (x, y) = cosine();
        let cfg = IteaConfig { popsize: 30, gens: 40, ..IteaConfig::default() };
        let gen = Generator { cfg: &cfg, dim: 3 };
        let mut r = rng(9);
        let mut t = gen.random(&mut r);
        for _ in 0..2000 {
            t = gen.mutate(&t, &mut r);
            assert!(!t.is_empty() && t.len() <= 10);
            assert!(t.iter().all(|(_, k)| k.iter().all(|v| v.abs() <= 3) && k.iter().any(|v| *v != 0)));
        }
        let m = fit_itea(&x, &y, &cfg, 0).unwrap();
        assert!(m.meta.it.is_some());
    }
}
