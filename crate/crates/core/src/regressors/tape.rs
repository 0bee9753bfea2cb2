use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{powi, Binary, ExprTree, Node, Unary};
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Param(usize),
    Unary(Unary, usize),
    Binary(Binary, usize, usize),
}

/// Reverse-mode differentiation of a tree with respect to its parameters.
///
/// Forward values follow the same operation order as tree evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    n_params: usize,
    vals: Vec<f64>,
    adj: Vec<f64>,
}

fn record(n: &Node, ops: &mut Vec<Op>) -> usize {
    let op = match n {
        Node::Const(c) => Op::Const(*c),
        Node::Var(i) => Op::Var(*i),
        Node::Param(i) => Op::Param(*i),
        Node::Unary(u, a) => {
            let a = record(a, ops);
            Op::Unary(*u, a)
        }
        Node::Binary(b, l, r) => {
            let l = record(l, ops);
            let r = record(r, ops);
            Op::Binary(*b, l, r)
        }
    };
    ops.push(op);
    ops.len() - 1
}

fn unary_slope(op: Unary, a: f64, v: f64) -> f64 {
    match op {
        Unary::Log => 1.0 / a,
        Unary::Sqrt => 1.0 / (2.0 * v),
        Unary::Sin => libm::cos(a),
        Unary::Cos => -libm::sin(a),
        Unary::Tanh => 1.0 - v * v,
        Unary::Exp => v,
        Unary::Expn => -v,
        Unary::Asin => 1.0 / libm::sqrt(1.0 - a * a),
        Unary::Square => 2.0 * a,
        Unary::Id => 1.0,
        Unary::Neg => -1.0,
        Unary::Powi(k) => f64::from(k) * powi(a, k - 1),
    }
}

impl Tape {
    pub fn new(tree: &ExprTree) -> Self {
        let mut ops = Vec::with_capacity(tree.size());
        record(tree.root(), &mut ops);
        let len = ops.len();
        Self { ops, n_params: tree.param_count(), vals: vec![0.0; len], adj: vec![0.0; len] }
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    fn forward(&mut self, x: &[f64], params: &[f64]) -> f64 {
        for k in 0..self.ops.len() {
            self.vals[k] = match self.ops[k] {
                Op::Const(c) => c,
                Op::Var(i) => x[i],
                Op::Param(i) => params[i],
                Op::Unary(u, a) => u.apply(self.vals[a]),
                Op::Binary(b, l, r) => b.apply(self.vals[l], self.vals[r]),
            };
        }
        self.vals.last().copied().unwrap_or(f64::NAN)
    }

    /// Value at `x` and its gradient with respect to the parameters.
    pub fn eval_grad(&mut self, x: &[f64], params: &[f64], grad: &mut [f64]) -> f64 {
        let out = self.forward(x, params);
        grad.fill(0.0);
        self.adj.fill(0.0);
        let last = self.ops.len() - 1;
        self.adj[last] = 1.0;
        for k in (0..=last).rev() {
            let g = self.adj[k];
            if g == 0.0 {
                continue;
            }
            match self.ops[k] {
                Op::Const(_) | Op::Var(_) => {}
                Op::Param(i) => grad[i] += g,
                Op::Unary(u, a) => self.adj[a] += g * unary_slope(u, self.vals[a], self.vals[k]),
                Op::Binary(b, l, r) => {
                    let (lv, rv) = (self.vals[l], self.vals[r]);
                    let (dl, dr) = match b {
                        Binary::Add => (1.0, 1.0),
                        Binary::Sub => (1.0, -1.0),
                        Binary::Mul => (rv, lv),
                        Binary::Div => (1.0 / rv, -self.vals[k] / rv),
                    };
                    self.adj[l] += g * dl;
                    self.adj[r] += g * dr;
                }
            }
        }
        out
    }

    /// Residuals `f(x_i) - y_i` and, when asked, the row-major Jacobian.
    pub fn residuals(&mut self, x: &Matrix, y: &[f64], params: &[f64], r: &mut [f64], jac: Option<&mut [f64]>) {
        let p = self.n_params;
        match jac {
            Some(j) => {
                for (i, row) in x.rows().enumerate() {
                    r[i] = self.eval_grad(row, params, &mut j[i * p..(i + 1) * p]) - y[i];
                }
            }
            None => {
                for (i, row) in x.rows().enumerate() {
                    r[i] = self.forward(row, params) - y[i];
                }
            }
        }
    }
}
