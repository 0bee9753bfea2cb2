use super::simplify::simplify;
use super::{Binary, ExprError, ExprTree, Node, Unary};

/// Differentiation target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrt {
    Var(usize),
    Param(usize),
}

pub(super) fn differentiate(tree: &ExprTree, wrt: Wrt) -> Result<ExprTree, ExprError> {
    let d = derive(tree.root(), wrt)?;
    Ok(ExprTree::new(simplify(&d)))
}

fn c(v: f64) -> Node {
    Node::Const(v)
}

fn u(op: Unary, a: &Node) -> Node {
    Node::unary(op, a.clone())
}

fn derive(n: &Node, wrt: Wrt) -> Result<Node, ExprError> {
    Ok(match n {
        Node::Const(_) => c(0.0),
        Node::Var(i) => c(if wrt == Wrt::Var(*i) { 1.0 } else { 0.0 }),
        Node::Param(i) => c(if wrt == Wrt::Param(*i) { 1.0 } else { 0.0 }),
        Node::Unary(op, a) => {
            let da = derive(a, wrt)?;
            if da == c(0.0) {
                return Ok(c(0.0));
            }
            let a = a.as_ref();
            let outer = match op {
                Unary::Log => return Ok(Node::div(da, a.clone())),
                Unary::Sqrt => {
                    return Ok(Node::div(da, Node::mul(c(2.0), u(Unary::Sqrt, a))));
                }
                Unary::Asin => {
                    let inner = Node::sub(c(1.0), u(Unary::Square, a));
                    return Ok(Node::div(da, Node::unary(Unary::Sqrt, inner)));
                }
                Unary::Sin => u(Unary::Cos, a),
                Unary::Cos => Node::unary(Unary::Neg, u(Unary::Sin, a)),
                Unary::Tanh => Node::sub(c(1.0), Node::unary(Unary::Square, u(Unary::Tanh, a))),
                Unary::Exp => u(Unary::Exp, a),
                Unary::Expn => Node::unary(Unary::Neg, u(Unary::Expn, a)),
                Unary::Square => Node::mul(c(2.0), a.clone()),
                Unary::Id => return Ok(da),
                Unary::Neg => return Ok(Node::unary(Unary::Neg, da)),
                Unary::Powi(k) => Node::mul(c(f64::from(*k)), u(Unary::Powi(k - 1), a)),
            };
            Node::mul(outer, da)
        }
        Node::Binary(op, a, b) => {
            let da = derive(a, wrt)?;
            let db = derive(b, wrt)?;
            match op {
                Binary::Add => Node::add(da, db),
                Binary::Sub => Node::sub(da, db),
                Binary::Mul => Node::add(
                    Node::mul(da, b.as_ref().clone()),
                    Node::mul(a.as_ref().clone(), db),
                ),
                Binary::Div => Node::div(
                    Node::sub(
                        Node::mul(da, b.as_ref().clone()),
                        Node::mul(a.as_ref().clone(), db),
                    ),
                    u(Unary::Square, b),
                ),
            }
        }
    })
}
