use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{powi, ExprError, ExprTree, Node, Unary};
use crate::Matrix;

/// One transformed interaction `coef * g(prod_i x_i^k_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItTerm {
    pub transform: Unary,
    pub strengths: Vec<i32>,
    pub coef: f64,
}

/// Interaction-transformation expression: `intercept + sum_j terms_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItExpression {
    pub intercept: f64,
    pub terms: Vec<ItTerm>,
}

/// `prod_i x_i^k_i`, negative strengths dividing. The operation order
/// matches [`interaction_node`] so tree and direct evaluation agree exactly.
#[inline]
pub fn interaction(strengths: &[i32], x: &[f64]) -> f64 {
    let mut num: Option<f64> = None;
    let mut den: Option<f64> = None;
    for (&k, &v) in strengths.iter().zip(x) {
        if k > 0 {
            let f = powi(v, k);
            num = Some(num.map_or(f, |a| a * f));
        } else if k < 0 {
            let f = powi(v, -k);
            den = Some(den.map_or(f, |a| a * f));
        }
    }
    match (num, den) {
        (Some(n), Some(d)) => n / d,
        (Some(n), None) => n,
        (None, Some(d)) => 1.0 / d,
        (None, None) => 1.0,
    }
}

fn factor(i: usize, k: i32) -> Node {
    if k == 1 {
        Node::Var(i)
    } else {
        Node::unary(Unary::Powi(k), Node::Var(i))
    }
}

pub fn interaction_node(strengths: &[i32]) -> Node {
    let mut num: Option<Node> = None;
    let mut den: Option<Node> = None;
    for (i, &k) in strengths.iter().enumerate() {
        if k > 0 {
            let f = factor(i, k);
            num = Some(match num {
                Some(a) => Node::mul(a, f),
                None => f,
            });
        } else if k < 0 {
            let f = factor(i, -k);
            den = Some(match den {
                Some(a) => Node::mul(a, f),
                None => f,
            });
        }
    }
    match (num, den) {
        (Some(n), Some(d)) => Node::div(n, d),
        (Some(n), None) => n,
        (None, Some(d)) => Node::div(Node::Const(1.0), d),
        (None, None) => Node::Const(1.0),
    }
}

impl ItTerm {
    /// `g(interaction)` without the coefficient.
    #[inline]
    pub fn basis(&self, x: &[f64]) -> f64 {
        let v = interaction(&self.strengths, x);
        match self.transform {
            Unary::Id => v,
            g => g.apply(v),
        }
    }

    /// The basis evaluated on every row.
    pub fn column(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.basis(r)).collect()
    }

    fn node(&self) -> Node {
        let inner = interaction_node(&self.strengths);
        let g = match self.transform {
            Unary::Id => inner,
            t => Node::unary(t, inner),
        };
        Node::mul(Node::Const(self.coef), g)
    }
}

impl ItExpression {
    pub fn new(intercept: f64, terms: Vec<ItTerm>) -> Self {
        Self { intercept, terms }
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.first().map(|t| t.strengths.len())
    }

    /// Checks strength lengths, nonzero strength vectors and uniqueness of
    /// `(transform, strengths)` pairs.
    pub fn validate(&self) -> Result<(), ExprError> {
        let d = self.dim().unwrap_or(0);
        let mut seen = BTreeSet::new();
        for (j, t) in self.terms.iter().enumerate() {
            if t.strengths.len() != d {
                return Err(ExprError::Invalid(format!(
                    "term {j} has {} strengths, expected {d}",
                    t.strengths.len()
                )));
            }
            if t.strengths.iter().all(|&k| k == 0) {
                return Err(ExprError::Invalid(format!("term {j} has all-zero strengths")));
            }
            if !seen.insert((t.transform, t.strengths.clone())) {
                return Err(ExprError::Invalid(format!("term {j} duplicates an earlier term")));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut acc = self.intercept;
        for t in &self.terms {
            acc += t.coef * t.basis(x);
        }
        acc
    }

    /// Tree form `b0 + sum_j b_j g_j(...)`. Identity transforms are elided.
    pub fn to_tree(&self) -> ExprTree {
        let mut root = Node::Const(self.intercept);
        for t in &self.terms {
            root = Node::add(root, t.node());
        }
        ExprTree::new(root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_product_term() {
        let it = ItExpression::new(
            1.0,
            vec![ItTerm { transform: Unary::Id, strengths: vec![1, 1], coef: 2.0 }],
        );
        assert_eq!(it.to_tree().evaluate(&[2.0, 3.0], &[]).unwrap(), 13.0);
        assert_eq!(it.evaluate(&[2.0, 3.0]), 13.0);
    }

    #[test]
    fn empty_is_intercept() {
        let it = ItExpression::new(4.5, vec![]);
        assert_eq!(it.to_tree().root(), &Node::Const(4.5));
    }

    #[test]
    fn negative_strength_divides() {
        let it = ItExpression::new(
            0.0,
            vec![ItTerm { transform: Unary::Sqrt, strengths: vec![2, -1, 0], coef: 1.0 }],
        );
        let x = [3.0, 4.0, 7.0];
        assert_eq!(it.evaluate(&x), libm::sqrt(9.0 / 4.0));
        assert_eq!(it.to_tree().evaluate(&x, &[]).unwrap().to_bits(), it.evaluate(&x).to_bits());
    }

    #[test]
    fn validation_rejects_duplicates_and_zero_terms() {
        let t = ItTerm { transform: Unary::Cos, strengths: vec![1, 0], coef: 1.0 };
        let dup = ItExpression::new(0.0, vec![t.clone(), ItTerm { coef: 2.0, ..t.clone() }]);
        assert!(dup.validate().is_err());
        let zero = ItExpression::new(
            0.0,
            vec![ItTerm { transform: Unary::Id, strengths: vec![0, 0], coef: 1.0 }],
        );
        assert!(zero.validate().is_err());
        let other = ItTerm { transform: Unary::Sin, ..t.clone() };
        assert!(ItExpression::new(0.0, vec![t, other]).validate().is_ok());
    }
}
