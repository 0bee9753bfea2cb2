//! Local algebraic rewriting. Not a computer-algebra system: only constant
//! folding, unit/zero identities, canonical ordering of commutative operands
//! and merging of like terms in sums.

use alloc::vec::Vec;

use super::{Binary, Node, Unary};

pub(super) fn simplify(n: &Node) -> Node {
    match n {
        Node::Const(_) | Node::Var(_) | Node::Param(_) => n.clone(),
        Node::Unary(op, a) => unary(*op, simplify(a)),
        Node::Binary(op, a, b) => binary(*op, simplify(a), simplify(b)),
    }
}

/// Deterministic structural hash.
pub(super) fn structural_hash(n: &Node) -> u64 {
    fn mix(h: u64, v: u64) -> u64 {
        crate::rng::splitmix64(h ^ v)
    }
    match n {
        Node::Const(c) => mix(1, c.to_bits()),
        Node::Var(i) => mix(2, *i as u64),
        Node::Param(i) => mix(3, *i as u64),
        Node::Unary(op, a) => {
            let tag = match op {
                Unary::Powi(k) => 0x100u64.wrapping_add(*k as i64 as u64),
                other => other
                    .name()
                    .bytes()
                    .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b))),
            };
            mix(mix(4, tag), structural_hash(a))
        }
        Node::Binary(op, a, b) => {
            mix(mix(mix(5, *op as u8 as u64), structural_hash(a)), structural_hash(b))
        }
    }
}

fn order_key(n: &Node) -> (u8, u64) {
    (if n.is_const() { 0 } else { 1 }, structural_hash(n))
}

fn is(n: &Node, v: f64) -> bool {
    matches!(n, Node::Const(c) if *c == v)
}

fn unary(op: Unary, a: Node) -> Node {
    if let Node::Const(v) = a {
        return Node::Const(op.apply(v));
    }
    match op {
        Unary::Id | Unary::Powi(1) => a,
        Unary::Powi(0) => Node::Const(1.0),
        Unary::Neg => match a {
            Node::Unary(Unary::Neg, inner) => *inner,
            Node::Binary(Binary::Mul, l, r) if l.is_const() => {
                let c = l.as_const().unwrap_or(0.0);
                Node::mul(Node::Const(-c), *r)
            }
            other => Node::unary(Unary::Neg, other),
        },
        _ => Node::unary(op, a),
    }
}

fn binary(op: Binary, a: Node, b: Node) -> Node {
    if let (Node::Const(x), Node::Const(y)) = (&a, &b) {
        return Node::Const(op.apply(*x, *y));
    }
    let n = match op {
        Binary::Add => {
            if is(&a, 0.0) {
                return b;
            }
            if is(&b, 0.0) {
                return a;
            }
            commutative(op, a, b)
        }
        Binary::Sub => {
            if is(&b, 0.0) {
                return a;
            }
            if is(&a, 0.0) {
                return unary(Unary::Neg, b);
            }
            if a == b {
                return Node::Const(0.0);
            }
            Node::sub(a, b)
        }
        Binary::Mul => {
            if is(&a, 0.0) || is(&b, 0.0) {
                return Node::Const(0.0);
            }
            if is(&a, 1.0) {
                return b;
            }
            if is(&b, 1.0) {
                return a;
            }
            if is(&a, -1.0) {
                return unary(Unary::Neg, b);
            }
            if is(&b, -1.0) {
                return unary(Unary::Neg, a);
            }
            let n = commutative(op, a, b);
            return fold_scaled(n);
        }
        Binary::Div => {
            if is(&b, 1.0) {
                return a;
            }
            if is(&a, 0.0) {
                return Node::Const(0.0);
            }
            if a == b {
                return Node::Const(1.0);
            }
            return Node::div(a, b);
        }
    };
    collect_sum(&n).unwrap_or(n)
}

fn commutative(op: Binary, a: Node, b: Node) -> Node {
    if order_key(&b) < order_key(&a) {
        Node::binary(op, b, a)
    } else {
        Node::binary(op, a, b)
    }
}

/// `c1 * (c2 * t)` becomes `(c1 c2) * t`; `c * (-t)` becomes `(-c) * t`.
fn fold_scaled(n: Node) -> Node {
    if let Node::Binary(Binary::Mul, l, r) = &n {
        if let Node::Const(c1) = **l {
            match r.as_ref() {
                Node::Binary(Binary::Mul, l2, r2) if l2.is_const() => {
                    let c2 = l2.as_const().unwrap_or(0.0);
                    return binary(Binary::Mul, Node::Const(c1 * c2), (**r2).clone());
                }
                Node::Unary(Unary::Neg, inner) => {
                    return binary(Binary::Mul, Node::Const(-c1), (**inner).clone());
                }
                _ => {}
            }
        }
    }
    n
}

struct Sum {
    constant: f64,
    constant_pieces: usize,
    terms: Vec<(f64, Node)>,
}

fn flatten(n: &Node, sign: f64, acc: &mut Sum) {
    match n {
        Node::Binary(Binary::Add, a, b) => {
            flatten(a, sign, acc);
            flatten(b, sign, acc);
        }
        Node::Binary(Binary::Sub, a, b) => {
            flatten(a, sign, acc);
            flatten(b, -sign, acc);
        }
        Node::Unary(Unary::Neg, a) => flatten(a, -sign, acc),
        Node::Const(c) => {
            acc.constant += sign * c;
            acc.constant_pieces += 1;
        }
        Node::Binary(Binary::Mul, l, r) if l.is_const() => {
            let c = l.as_const().unwrap_or(0.0);
            acc.terms.push((sign * c, (**r).clone()));
        }
        other => acc.terms.push((sign, other.clone())),
    }
}

/// Merges like terms of a sum. Returns `None` when nothing merges, so
/// untouched sums keep their original association.
fn collect_sum(n: &Node) -> Option<Node> {
    let mut sum = Sum { constant: 0.0, constant_pieces: 0, terms: Vec::new() };
    flatten(n, 1.0, &mut sum);
    let mut merged: Vec<(f64, Node)> = Vec::with_capacity(sum.terms.len());
    let mut changed = sum.constant_pieces > 1;
    for (c, t) in sum.terms {
        match merged.iter_mut().find(|(_, m)| *m == t) {
            Some(slot) => {
                slot.0 += c;
                changed = true;
            }
            None => merged.push((c, t)),
        }
    }
    if !changed {
        return None;
    }
    merged.retain(|(c, _)| *c != 0.0);
    let mut out: Option<Node> = None;
    for (c, t) in merged {
        let mag = c.abs();
        let term = if mag == 1.0 { t } else { Node::mul(Node::Const(mag), t) };
        out = Some(match out {
            None if c < 0.0 => unary(Unary::Neg, term),
            None => term,
            Some(acc) if c < 0.0 => Node::sub(acc, term),
            Some(acc) => Node::add(acc, term),
        });
    }
    Some(match out {
        None => Node::Const(sum.constant),
        Some(acc) if sum.constant == 0.0 => acc,
        Some(acc) if sum.constant < 0.0 => Node::sub(acc, Node::Const(-sum.constant)),
        Some(acc) => Node::add(acc, Node::Const(sum.constant)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ExprTree};

    fn s(text: &str) -> Node {
        parse(text, &["x", "y"]).unwrap().simplify().into_root()
    }

    #[test]
    fn self_difference_is_zero() {
        assert_eq!(s("sin(x*y) - sin(x*y)"), Node::Const(0.0));
        assert_eq!(s("sin(x*y) - sin(y*x)"), Node::Const(0.0));
        assert_eq!(s("(x + y) - (y + x)"), Node::Const(0.0));
    }

    #[test]
    fn unit_and_zero_identities() {
        assert_eq!(s("1*x + 0"), Node::Var(0));
        assert_eq!(s("2*3"), Node::Const(6.0));
        assert_eq!(s("0*cos(y)"), Node::Const(0.0));
        assert_eq!(s("x^0"), Node::Const(1.0));
    }

    #[test]
    fn like_terms_merge() {
        let t = ExprTree::new(s("x + x - 2*x"));
        assert_eq!(t.root(), &Node::Const(0.0));
        let t = ExprTree::new(s("3*x + y - x"));
        assert_eq!(t.evaluate(&[1.5, 2.0], &[]).unwrap(), 5.0);
    }
}
