use alloc::vec;
use alloc::vec::Vec;

use super::{Binary, ExprError, ExprTree, Node, Unary};
use crate::Matrix;

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Instr {
    Const(f64),
    Var(usize),
    Param(usize),
    Unary(Unary),
    Binary(Binary),
}

/// A tree compiled to postfix code for fast repeated evaluation.
///
/// Batch evaluation runs column-wise over chunks of rows and performs the
/// same floating-point operations in the same order as [`ExprTree::evaluate`],
/// so both paths agree bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    code: Vec<Instr>,
    min_dim: usize,
    n_params: usize,
    max_stack: usize,
}

impl Program {
    pub fn new(tree: &ExprTree) -> Self {
        let mut code = Vec::with_capacity(tree.size());
        emit(tree.root(), &mut code);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for ins in &code {
            match ins {
                Instr::Const(_) | Instr::Var(_) | Instr::Param(_) => depth += 1,
                Instr::Unary(_) => {}
                Instr::Binary(_) => depth -= 1,
            }
            max_stack = max_stack.max(depth);
        }
        Self {
            code,
            min_dim: tree.min_dim(),
            n_params: tree.param_count(),
            max_stack,
        }
    }

    pub fn min_dim(&self) -> usize {
        self.min_dim
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    fn check(&self, dim: usize, params: &[f64]) -> Result<(), ExprError> {
        if self.min_dim > dim {
            return Err(ExprError::VariableOutOfRange { index: self.min_dim - 1, dim });
        }
        if self.n_params > params.len() {
            return Err(ExprError::ParameterOutOfRange {
                index: self.n_params - 1,
                len: params.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], params: &[f64]) -> Result<f64, ExprError> {
        self.check(x.len(), params)?;
        let mut stack = Vec::with_capacity(self.max_stack);
        Ok(self.eval_unchecked(x, params, &mut stack))
    }

    fn eval_unchecked(&self, x: &[f64], params: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for ins in &self.code {
            match *ins {
                Instr::Const(c) => stack.push(c),
                Instr::Var(i) => stack.push(x[i]),
                Instr::Param(i) => stack.push(params[i]),
                Instr::Unary(op) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = op.apply(*top);
                }
                Instr::Binary(op) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a = op.apply(*a, b);
                }
            }
        }
        stack.pop().unwrap_or(f64::NAN)
    }

    /// Like [`Program::eval`], but yields NaN as soon as any intermediate
    /// value is non-finite, so limits such as `1 / (1 + 0^-4)` count as
    /// undefined.
    pub fn eval_strict(&self, x: &[f64], params: &[f64]) -> Result<f64, ExprError> {
        self.check(x.len(), params)?;
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        for ins in &self.code {
            let v = match *ins {
                Instr::Const(c) => c,
                Instr::Var(i) => x[i],
                Instr::Param(i) => params[i],
                Instr::Unary(op) => {
                    let a = stack.pop().expect("stack underflow");
                    op.apply(a)
                }
                Instr::Binary(op) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    op.apply(a, b)
                }
            };
            if !v.is_finite() {
                return Ok(f64::NAN);
            }
            stack.push(v);
        }
        Ok(stack.pop().unwrap_or(f64::NAN))
    }

    /// [`Program::eval_strict`] on every row of `x`.
    pub fn eval_batch_strict(&self, x: &Matrix, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check(x.ncols(), params)?;
        x.rows().map(|r| self.eval_strict(r, params)).collect()
    }

    /// Evaluates every row of `x`.
    pub fn eval_batch(&self, x: &Matrix, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = vec![0.0; x.nrows()];
        self.eval_batch_into(x, params, &mut out)?;
        Ok(out)
    }

    pub fn eval_batch_into(
        &self,
        x: &Matrix,
        params: &[f64],
        out: &mut [f64],
    ) -> Result<(), ExprError> {
        assert_eq!(out.len(), x.nrows(), "output length mismatch");
        self.check(x.ncols(), params)?;
        let n = x.nrows();
        if n == 0 {
            return Ok(());
        }
        let d = x.ncols();
        let data = x.as_slice();
        let mut bufs = vec![[0.0f64; CHUNK]; self.max_stack.max(1)];
        let mut start = 0;
        while start < n {
            let len = CHUNK.min(n - start);
            let mut sp = 0usize;
            for ins in &self.code {
                match *ins {
                    Instr::Const(c) => {
                        bufs[sp][..len].fill(c);
                        sp += 1;
                    }
                    Instr::Var(j) => {
                        let buf = &mut bufs[sp][..len];
                        for (k, v) in buf.iter_mut().enumerate() {
                            *v = data[(start + k) * d + j];
                        }
                        sp += 1;
                    }
                    Instr::Param(i) => {
                        bufs[sp][..len].fill(params[i]);
                        sp += 1;
                    }
                    Instr::Unary(op) => {
                        for v in &mut bufs[sp - 1][..len] {
                            *v = op.apply(*v);
                        }
                    }
                    Instr::Binary(op) => {
                        let (lo, hi) = bufs.split_at_mut(sp - 1);
                        let a = &mut lo[sp - 2][..len];
                        let b = &hi[0][..len];
                        match op {
                            Binary::Add => a.iter_mut().zip(b).for_each(|(a, b)| *a += b),
                            Binary::Sub => a.iter_mut().zip(b).for_each(|(a, b)| *a -= b),
                            Binary::Mul => a.iter_mut().zip(b).for_each(|(a, b)| *a *= b),
                            Binary::Div => a.iter_mut().zip(b).for_each(|(a, b)| *a /= b),
                        }
                        sp -= 1;
                    }
                }
            }
            out[start..start + len].copy_from_slice(&bufs[0][..len]);
            start += len;
        }
        Ok(())
    }
}

fn emit(n: &Node, code: &mut Vec<Instr>) {
    match n {
        Node::Const(c) => code.push(Instr::Const(*c)),
        Node::Var(i) => code.push(Instr::Var(*i)),
        Node::Param(i) => code.push(Instr::Param(*i)),
        Node::Unary(op, a) => {
            emit(a, code);
            code.push(Instr::Unary(*op));
        }
        Node::Binary(op, a, b) => {
            emit(a, code);
            emit(b, code);
            code.push(Instr::Binary(*op));
        }
    }
}

fn eval_node(n: &Node, x: &[f64], params: &[f64]) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Param(i) => params[*i],
        Node::Unary(op, a) => op.apply(eval_node(a, x, params)),
        Node::Binary(op, a, b) => {
            let a = eval_node(a, x, params);
            op.apply(a, eval_node(b, x, params))
        }
    }
}

impl ExprTree {
    /// Evaluates the tree at one point.
    pub fn evaluate(&self, x: &[f64], params: &[f64]) -> Result<f64, ExprError> {
        let dim = self.min_dim();
        if dim > x.len() {
            return Err(ExprError::VariableOutOfRange { index: dim - 1, dim: x.len() });
        }
        let p = self.param_count();
        if p > params.len() {
            return Err(ExprError::ParameterOutOfRange { index: p - 1, len: params.len() });
        }
        Ok(eval_node(self.root(), x, params))
    }

    /// Evaluates the tree on every row of `x`.
    pub fn evaluate_batch(&self, x: &Matrix, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.compile().eval_batch(x, params)
    }

    pub fn compile(&self) -> Program {
        Program::new(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn korns_11_at_origin() {
        let t = parse("6.87 + 11*cos(7.23*x^3)", &["x", "y", "z", "v", "w"]).unwrap();
        let v = t.evaluate(&[0.0, 1.0, 2.0, 3.0, 4.0], &[]).unwrap();
        assert!((v - 17.87).abs() < 1e-12);
    }

    #[test]
    fn identity_and_domain_errors() {
        let x = ExprTree::var(0);
        assert_eq!(x.evaluate(&[3.5], &[]).unwrap(), 3.5);
        let l = ExprTree::new(Node::unary(Unary::Log, Node::Var(0)));
        assert!(!l.evaluate(&[-1.0], &[]).unwrap().is_finite());
        assert!(matches!(
            ExprTree::var(2).evaluate(&[1.0], &[]),
            Err(ExprError::VariableOutOfRange { index: 2, dim: 1 })
        ));
        assert!(matches!(
            ExprTree::new(Node::Param(0)).evaluate(&[], &[]),
            Err(ExprError::ParameterOutOfRange { .. })
        ));
    }

    #[test]
    fn batch_on_pagie_and_empty() {
        let t = parse("1/(1+x^-4) + 1/(1+y^-4)", &["x", "y"]).unwrap();
        let m = Matrix::from_rows(&[vec![1.0, 1.0]]);
        assert_eq!(t.evaluate_batch(&m, &[]).unwrap(), vec![1.0]);
        assert!(t.evaluate_batch(&Matrix::empty(2), &[]).unwrap().is_empty());
    }

    #[test]
    fn batch_matches_pointwise_bitwise() {
        use rand::Rng;
        let t = parse("sin(x)*exp(-y)/(1+x^2) - sqrt(abs_y)", &["x", "y", "abs_y"]).unwrap();
        let mut r = crate::rng::rng(3);
        let rows: Vec<Vec<f64>> = (0..700)
            .map(|_| vec![r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(0.0..3.0)])
            .collect();
        let m = Matrix::from_rows(&rows);
        let batch = t.evaluate_batch(&m, &[]).unwrap();
        for (row, b) in rows.iter().zip(&batch) {
            assert_eq!(t.evaluate(row, &[]).unwrap().to_bits(), b.to_bits());
        }
    }
}
