//! Expression trees: the shared representation for ground-truth equations
//! and for every regression model that has a symbolic form.
//!
//! Trees are immutable values. Evaluation follows IEEE semantics: a
//! primitive applied outside its domain (`log` of a negative, `asin` outside
//! `[-1, 1]`, division by zero) produces a non-finite value that propagates
//! instead of a "protected" surrogate. Out-of-range variable or parameter
//! indices are contract violations and are reported as [`ExprError`]s.

mod diff;
mod eval;
mod hit;
mod it;
mod parse;
mod simplify;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use diff::Wrt;
pub use eval::Program;
pub use hit::{is_hit, HitVerdict, HIT_SAMPLES, HIT_TOLERANCE};
pub use it::{ItExpression, ItTerm};
pub use parse::{parse, parse_prefix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("variable index {index} out of range for {dim} features")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("parameter index {index} out of range for {len} parameters")]
    ParameterOutOfRange { index: usize, len: usize },
    #[error("no differentiation rule for `{0}`")]
    NoDerivativeRule(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("invalid expression: {0}")]
    Invalid(String),
}

/// Integer powers with `|k|` up to this bound are evaluated by repeated
/// multiplication; larger exponents go through `pow`.
pub const EXACT_POWI_LIMIT: i32 = 12;

/// Unary primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unary {
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Exp,
    /// `exp(-x)`.
    Expn,
    Asin,
    Square,
    Id,
    Neg,
    /// Integer power `x^k`.
    Powi(i32),
}

/// Binary primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[inline]
pub fn powi(x: f64, k: i32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let m = k.unsigned_abs();
    let r = if m <= EXACT_POWI_LIMIT as u32 {
        let mut r = x;
        for _ in 1..m {
            r *= x;
        }
        r
    } else {
        libm::pow(x, f64::from(m))
    };
    if k < 0 {
        1.0 / r
    } else {
        r
    }
}

impl Unary {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Log => libm::log(x),
            Unary::Sqrt => libm::sqrt(x),
            Unary::Sin => libm::sin(x),
            Unary::Cos => libm::cos(x),
            Unary::Tanh => libm::tanh(x),
            Unary::Exp => libm::exp(x),
            Unary::Expn => libm::exp(-x),
            Unary::Asin => libm::asin(x),
            Unary::Square => x * x,
            Unary::Id => x,
            Unary::Neg => -x,
            Unary::Powi(k) => powi(x, k),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unary::Log => "log",
            Unary::Sqrt => "sqrt",
            Unary::Sin => "sin",
            Unary::Cos => "cos",
            Unary::Tanh => "tanh",
            Unary::Exp => "exp",
            Unary::Expn => "expn",
            Unary::Asin => "asin",
            Unary::Square => "square",
            Unary::Id => "id",
            Unary::Neg => "neg",
            Unary::Powi(_) => "powi",
        }
    }

    /// Named unary functions accepted by the parsers (`powi` excluded).
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "log" | "ln" => Unary::Log,
            "sqrt" => Unary::Sqrt,
            "sin" => Unary::Sin,
            "cos" => Unary::Cos,
            "tanh" => Unary::Tanh,
            "exp" => Unary::Exp,
            "expn" => Unary::Expn,
            "asin" | "arcsin" => Unary::Asin,
            "square" => Unary::Square,
            "id" => Unary::Id,
            "neg" => Unary::Neg,
            _ => return None,
        })
    }
}

impl Binary {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Binary::Add => a + b,
            Binary::Sub => a - b,
            Binary::Mul => a * b,
            Binary::Div => a / b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Binary::Add => '+',
            Binary::Sub => '-',
            Binary::Mul => '*',
            Binary::Div => '/',
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "add" => Binary::Add,
            "sub" => Binary::Sub,
            "mul" => Binary::Mul,
            "div" => Binary::Div,
            _ => return None,
        })
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Binary::Add | Binary::Mul)
    }
}

/// The primitives a search procedure may draw from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSet {
    pub unary: Vec<Unary>,
    pub binary: Vec<Binary>,
}

impl FunctionSet {
    /// Every primitive the evaluator knows, integer powers excluded.
    pub fn full() -> Self {
        use Unary::*;
        Self {
            unary: alloc::vec![Log, Sqrt, Sin, Cos, Tanh, Exp, Expn, Asin, Square, Id],
            binary: alloc::vec![Binary::Add, Binary::Sub, Binary::Mul, Binary::Div],
        }
    }

    /// Transformation functions for interaction-transformation terms.
    pub fn itea() -> Self {
        use Unary::*;
        Self {
            unary: alloc::vec![Log, Sqrt, Id, Sin, Cos, Tanh, Exp, Expn, Asin],
            binary: Vec::new(),
        }
    }

    /// Primitives for tree-based genetic programming.
    pub fn gpnls() -> Self {
        use Unary::*;
        Self {
            unary: alloc::vec![Exp, Log, Sqrt, Square, Sin, Cos, Tanh, Asin],
            binary: alloc::vec![Binary::Add, Binary::Sub, Binary::Mul, Binary::Div],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    /// 0-based feature index.
    Var(usize),
    /// Slot in a parameter vector.
    Param(usize),
    Unary(Unary, Box<Node>),
    Binary(Binary, Box<Node>, Box<Node>),
}

impl Node {
    pub fn unary(op: Unary, a: Node) -> Node {
        Node::Unary(op, Box::new(a))
    }

    pub fn binary(op: Binary, a: Node, b: Node) -> Node {
        Node::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Node, b: Node) -> Node {
        Node::binary(Binary::Add, a, b)
    }

    pub fn sub(a: Node, b: Node) -> Node {
        Node::binary(Binary::Sub, a, b)
    }

    pub fn mul(a: Node, b: Node) -> Node {
        Node::binary(Binary::Mul, a, b)
    }

    pub fn div(a: Node, b: Node) -> Node {
        Node::binary(Binary::Div, a, b)
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => 1,
            Node::Unary(_, a) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => 1,
            Node::Unary(_, a) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Node::Const(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Pre-order visit of every node.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        match self {
            Node::Unary(_, a) => a.visit(f),
            Node::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Rebuilds the tree bottom-up through `f`.
    pub fn map_leaves(&self, f: &mut impl FnMut(&Node) -> Node) -> Node {
        match self {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => f(self),
            Node::Unary(op, a) => Node::unary(*op, a.map_leaves(f)),
            Node::Binary(op, a, b) => {
                let a = a.map_leaves(f);
                let b = b.map_leaves(f);
                Node::binary(*op, a, b)
            }
        }
    }
}

/// An expression tree over features `x0..x{d-1}` and parameters
/// `p0..p{p-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprTree {
    root: Node,
}

impl ExprTree {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Node::Const(c))
    }

    pub fn var(i: usize) -> Self {
        Self::new(Node::Var(i))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    /// Total node count.
    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Smallest dimensionality the tree can be evaluated at.
    pub fn min_dim(&self) -> usize {
        let mut m = 0;
        self.root.visit(&mut |n| {
            if let Node::Var(i) = n {
                m = m.max(i + 1);
            }
        });
        m
    }

    /// Sorted, de-duplicated feature indices referenced by the tree.
    pub fn variables(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.root.visit(&mut |n| {
            if let Node::Var(i) = n {
                v.push(*i);
            }
        });
        v.sort_unstable();
        v.dedup();
        v
    }

    /// One past the largest parameter index.
    pub fn param_count(&self) -> usize {
        let mut m = 0;
        self.root.visit(&mut |n| {
            if let Node::Param(i) = n {
                m = m.max(i + 1);
            }
        });
        m
    }

    /// Checks that parameter indices are exactly `0..p`, each used.
    pub fn validate_params(&self) -> Result<(), ExprError> {
        let p = self.param_count();
        let mut seen = alloc::vec![false; p];
        self.root.visit(&mut |n| {
            if let Node::Param(i) = n {
                seen[*i] = true;
            }
        });
        match seen.iter().position(|s| !s) {
            Some(i) => Err(ExprError::Invalid(alloc::format!("parameter p{i} is never used"))),
            None => Ok(()),
        }
    }

    /// Replaces every parameter by its value.
    pub fn bind_params(&self, params: &[f64]) -> Result<ExprTree, ExprError> {
        let p = self.param_count();
        if p > params.len() {
            return Err(ExprError::ParameterOutOfRange { index: p - 1, len: params.len() });
        }
        Ok(ExprTree::new(self.root.map_leaves(&mut |n| match n {
            Node::Param(i) => Node::Const(params[*i]),
            other => other.clone(),
        })))
    }

    pub fn differentiate(&self, wrt: Wrt) -> Result<ExprTree, ExprError> {
        diff::differentiate(self, wrt)
    }

    pub fn simplify(&self) -> ExprTree {
        ExprTree::new(simplify::simplify(&self.root))
    }

    /// Canonical prefix notation, e.g. `(add (mul 2.0 x0) p0)`.
    pub fn to_prefix(&self) -> String {
        let mut s = String::new();
        write_prefix(&self.root, &mut s);
        s
    }

    /// Infix rendering with the given feature names (falls back to `x{i}`).
    /// Output is accepted by [`parse`] with the same names.
    pub fn render(&self, names: &[&str]) -> String {
        let mut s = String::new();
        write_infix(&self.root, names, &mut s);
        s
    }
}

fn fmt_f64(v: f64, out: &mut String) {
    use core::fmt::Write;
    let _ = write!(out, "{v:?}");
}

fn write_prefix(n: &Node, out: &mut String) {
    use core::fmt::Write;
    match n {
        Node::Const(c) => fmt_f64(*c, out),
        Node::Var(i) => {
            let _ = write!(out, "x{i}");
        }
        Node::Param(i) => {
            let _ = write!(out, "p{i}");
        }
        Node::Unary(Unary::Powi(k), a) => {
            let _ = write!(out, "(powi {k} ");
            write_prefix(a, out);
            out.push(')');
        }
        Node::Unary(op, a) => {
            out.push('(');
            out.push_str(op.name());
            out.push(' ');
            write_prefix(a, out);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            out.push('(');
            out.push_str(op.name());
            out.push(' ');
            write_prefix(a, out);
            out.push(' ');
            write_prefix(b, out);
            out.push(')');
        }
    }
}

fn write_infix(n: &Node, names: &[&str], out: &mut String) {
    use core::fmt::Write;
    match n {
        Node::Const(c) if c.is_nan() => out.push_str("(0/0)"),
        Node::Const(c) if c.is_infinite() => {
            out.push_str(if *c > 0.0 { "(1/0)" } else { "(-1/0)" })
        }
        Node::Const(c) if c.is_sign_negative() => {
            out.push('(');
            fmt_f64(*c, out);
            out.push(')');
        }
        Node::Const(c) => fmt_f64(*c, out),
        Node::Var(i) => match names.get(*i) {
            Some(name) => out.push_str(name),
            None => {
                let _ = write!(out, "x{i}");
            }
        },
        Node::Param(i) => {
            let _ = write!(out, "${i}");
        }
        Node::Unary(Unary::Powi(k), a) => {
            out.push('(');
            write_infix(a, names, out);
            let _ = write!(out, ")^({k})");
        }
        Node::Unary(Unary::Neg, a) => {
            out.push_str("(-");
            write_infix(a, names, out);
            out.push(')');
        }
        Node::Unary(op, a) => {
            out.push_str(op.name());
            out.push('(');
            write_infix(a, names, out);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            out.push('(');
            write_infix(a, names, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            write_infix(b, names, out);
            out.push(')');
        }
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

impl From<Node> for ExprTree {
    fn from(root: Node) -> Self {
        ExprTree::new(root)
    }
}

impl Serialize for ExprTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_prefix())
    }
}

impl<'de> Deserialize<'de> for ExprTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_prefix(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_counts_every_node() {
        assert_eq!(ExprTree::constant(1.0).size(), 1);
        let t = ExprTree::new(Node::add(Node::Var(0), Node::Var(1)));
        assert_eq!(t.size(), 3);
    }

    #[test]
    fn powi_small_and_large_exponents() {
        assert_eq!(powi(2.0, 3), 8.0);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(5.0, 0), 1.0);
        assert!((powi(1.1, 20) - libm::pow(1.1, 20.0)).abs() < 1e-12);
        assert!(powi(0.0, -4).is_infinite());
    }

    #[test]
    fn prefix_is_canonical_text() {
        let t = ExprTree::new(Node::add(
            Node::mul(Node::Const(2.0), Node::Var(0)),
            Node::unary(Unary::Powi(-4), Node::Param(0)),
        ));
        assert_eq!(t.to_prefix(), "(add (mul 2.0 x0) (powi -4 p0))");
    }

    #[test]
    fn param_contiguity() {
        let ok = ExprTree::new(Node::add(Node::Param(0), Node::Param(1)));
        assert!(ok.validate_params().is_ok());
        let gap = ExprTree::new(Node::add(Node::Param(0), Node::Param(2)));
        assert!(gap.validate_params().is_err());
    }
}
