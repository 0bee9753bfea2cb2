use alloc::vec::Vec;

use super::{ExprTree, Node};
use crate::dataset::FeatureSpace;
use crate::Matrix;

/// Number of quasi-random points used by the numeric check.
pub const HIT_SAMPLES: usize = 10_000;
/// Largest absolute difference still counted as equal.
pub const HIT_TOLERANCE: f64 = 1e-10;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitVerdict {
    /// `simplify(candidate - truth)` is the zero constant.
    pub symbolic: bool,
    /// The two trees agree within [`HIT_TOLERANCE`] on every sampled point.
    pub numeric: bool,
    /// Largest absolute difference over points where both are finite.
    pub max_abs_diff: f64,
}

impl HitVerdict {
    pub fn hit(&self) -> bool {
        self.symbolic || self.numeric
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points scaled to the space bounds (the all-zero index is skipped).
pub fn halton(space: &FeatureSpace, n: usize) -> Matrix {
    let d = space.dim();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            let base = PRIMES[j % PRIMES.len()];
            // Beyond the prime table, offset the index to decorrelate.
            let idx = (i + 1 + 409 * (j / PRIMES.len())) as u64;
            let u = radical_inverse(idx, base);
            data.push(space.lower[j] + u * (space.upper[j] - space.lower[j]));
        }
    }
    Matrix::from_vec(n, d, data)
}

/// Decides whether `candidate` recovers `truth` on `space`, recording both
/// the symbolic and the numeric verdict.
pub fn is_hit(candidate: &ExprTree, truth: &ExprTree, space: &FeatureSpace) -> HitVerdict {
    let diff = ExprTree::new(Node::sub(candidate.root().clone(), truth.root().clone()));
    let symbolic = matches!(diff.simplify().root(), Node::Const(c) if *c == 0.0);

    let pts = halton(space, HIT_SAMPLES);
    let (Ok(a), Ok(b)) = (candidate.evaluate_batch(&pts, &[]), truth.evaluate_batch(&pts, &[]))
    else {
        return HitVerdict { symbolic, numeric: false, max_abs_diff: f64::INFINITY };
    };
    let mut numeric = true;
    let mut compared = 0usize;
    let mut max_abs_diff = 0.0_f64;
    for (u, v) in a.iter().zip(&b) {
        match (u.is_finite(), v.is_finite()) {
            (true, true) => {
                let e = (u - v).abs();
                max_abs_diff = max_abs_diff.max(e);
                compared += 1;
                if e >= HIT_TOLERANCE {
                    numeric = false;
                }
            }
            (false, false) => {}
            _ => numeric = false,
        }
    }
    if compared == 0 {
        numeric = false;
        max_abs_diff = f64::INFINITY;
    }
    HitVerdict { symbolic, numeric, max_abs_diff }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn space() -> FeatureSpace {
        FeatureSpace::new(&["x", "y"], &[-2.0, -2.0], &[2.0, 2.0]).unwrap()
    }

    #[test]
    fn identical_trees_hit() {
        let t = parse("sin(x)*y + 3", &["x", "y"]).unwrap();
        let v = is_hit(&t, &t, &space());
        assert!(v.symbolic && v.numeric);
    }

    #[test]
    fn offset_misses() {
        let t = parse("sin(x)*y + 3", &["x", "y"]).unwrap();
        let c = parse("sin(x)*y + 3 + 1e-3", &["x", "y"]).unwrap();
        assert!(!is_hit(&c, &t, &space()).hit());
    }

    #[test]
    fn numeric_fallback_catches_missed_rewrites() {
        let t = parse("2*x*y", &["x", "y"]).unwrap();
        let c = parse("x*y + y*x", &["x", "y"]).unwrap();
        assert!(is_hit(&c, &t, &space()).hit());
        let t = parse("(x+1)^2", &["x", "y"]).unwrap();
        let c = parse("x^2 + 2*x + 1", &["x", "y"]).unwrap();
        let v = is_hit(&c, &t, &space());
        assert!(!v.symbolic && v.numeric);
    }
}
