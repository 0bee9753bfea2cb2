use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::rng::rng;

/// A uniformly random permutation of the ranks `1..=d`.
pub fn random_ranks(d: usize, seed: u64) -> Vec<f64> {
    let mut v: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    v.shuffle(&mut rng(seed));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_a_permutation() {
        let mut differs = false;
        let first = random_ranks(5, 0);
        for s in 0..100 {
            let mut v = random_ranks(5, s);
            differs |= v != first;
            v.sort_by(f64::total_cmp);
            assert_eq!(v, alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        }
        assert!(differs);
        assert_eq!(random_ranks(1, 7), alloc::vec![1.0]);
    }
}
