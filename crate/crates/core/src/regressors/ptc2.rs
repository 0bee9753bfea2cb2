use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::expr::{Binary, FunctionSet, Node, Unary};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Ptc2Config {
    /// Maximum number of levels, counting the root as 1.
    pub max_depth: usize,
    pub max_size: usize,
    pub functions: FunctionSet,
    /// Probability of picking a binary primitive when one fits.
    pub binary_rate: f64,
    /// Probability that a terminal is a variable rather than a constant.
    pub var_rate: f64,
    /// Constants are drawn from `[-c, c]`.
    pub const_range: f64,
}

impl Default for Ptc2Config {
    fn default() -> Self {
        Self {
            max_depth: 10,
            max_size: 50,
            functions: FunctionSet::gpnls(),
            binary_rate: 0.7,
            var_rate: 0.75,
            const_range: 1.0,
        }
    }
}

enum Slot {
    Open(usize),
    Term(Node),
    Un(Unary, usize),
    Bin(Binary, usize, usize),
}

pub(crate) fn terminal(dim: usize, cfg: &Ptc2Config, r: &mut Rng) -> Node {
    if dim > 0 && r.random_bool(cfg.var_rate) {
        Node::Var(r.random_range(0..dim))
    } else {
        Node::Const(r.random_range(-cfg.const_range..=cfg.const_range))
    }
}

fn build(slots: &mut Vec<Option<Slot>>, i: usize) -> Node {
    match slots[i].take().expect("slot visited twice") {
        Slot::Term(n) => n,
        Slot::Open(_) => unreachable!("open slot left after filling"),
        Slot::Un(op, a) => Node::Unary(op, Box::new(build(slots, a))),
        Slot::Bin(op, a, b) => {
            let a = build(slots, a);
            Node::Binary(op, Box::new(a), Box::new(build(slots, b)))
        }
    }
}

/// Probabilistic tree creation: draws a target size uniformly from
/// `1..=max_size`, expands random open slots with primitives until the
/// target is reached, then fills the remaining slots with terminals.
pub fn ptc2(dim: usize, cfg: &Ptc2Config, r: &mut Rng) -> Node {
    let target = r.random_range(1..=cfg.max_size.max(1));
    let fs = &cfg.functions;
    let mut slots: Vec<Option<Slot>> = alloc::vec![Some(Slot::Open(1))];
    let mut open = alloc::vec![0usize];
    let mut size = 1;
    while !open.is_empty() && size < target {
        let i = open.swap_remove(r.random_range(0..open.len()));
        let Some(Slot::Open(depth)) = slots[i] else { unreachable!() };
        let can_un = !fs.unary.is_empty() && depth < cfg.max_depth;
        let can_bin = !fs.binary.is_empty() && depth < cfg.max_depth && size + 2 <= target;
        let binary = can_bin && (!can_un || r.random_bool(cfg.binary_rate));
        if binary {
            let op = fs.binary[r.random_range(0..fs.binary.len())];
            let (a, b) = (slots.len(), slots.len() + 1);
            slots.push(Some(Slot::Open(depth + 1)));
            slots.push(Some(Slot::Open(depth + 1)));
            open.extend([a, b]);
            slots[i] = Some(Slot::Bin(op, a, b));
            size += 2;
        } else if can_un {
            let op = fs.unary[r.random_range(0..fs.unary.len())];
            let a = slots.len();
            slots.push(Some(Slot::Open(depth + 1)));
            open.push(a);
            slots[i] = Some(Slot::Un(op, a));
            size += 1;
        } else {
            slots[i] = Some(Slot::Term(terminal(dim, cfg, r)));
        }
    }
    for i in open {
        slots[i] = Some(Slot::Term(terminal(dim, cfg, r)));
    }
    build(&mut slots, 0)
}
