//! Median/IQR summaries, the Wilcoxon signed-rank test, Holm correction and
//! average ranks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Largest sample size tested with the exact null distribution.
pub const EXACT_CUTOFF: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub median: f64,
    pub iqr: f64,
    pub n: usize,
}

/// Quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range of `values`, which must be non-empty.
pub fn median_iqr(group: &str, values: &[f64]) -> GroupSummary {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    GroupSummary {
        group: group.into(),
        median: quantile(&v, 0.5),
        iqr: quantile(&v, 0.75) - quantile(&v, 0.25),
        n: v.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Two-sided p-value.
    pub p: f64,
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub method: WilcoxonMethod,
    /// Set when every difference was zero.
    pub degenerate: bool,
}

/// Average ranks (1-based) of `v`, ties sharing their mean rank.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

/// Two-sided Wilcoxon signed-rank test of the paired samples `a` and `b`.
/// Zero differences are dropped. Up to [`EXACT_CUTOFF`] pairs the null
/// distribution is enumerated; above it the normal approximation with tie
/// and continuity corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> WilcoxonResult {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return WilcoxonResult { p: 1.0, w_plus: 0.0, n, method: WilcoxonMethod::Exact, degenerate: true };
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = fractional_ranks(&mags);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let p = if n <= EXACT_CUTOFF {
        exact_p(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut ties = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            ties += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    let method = if n <= EXACT_CUTOFF { WilcoxonMethod::Exact } else { WilcoxonMethod::Normal };
    WilcoxonResult { p, w_plus, n, method, degenerate: false }
}

/// Exact two-sided p-value by counting sign assignments. Ranks are
/// doubled so tied half ranks stay integral.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let r2: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = r2.iter().sum();
    let mut count = vec![0.0f64; total + 1];
    count[0] = 1.0;
    for &r in &r2 {
        for s in (r..=total).rev() {
            count[s] += count[s - r];
        }
    }
    let all = libm::pow(2.0, ranks.len() as f64);
    let w = libm::round(2.0 * w_plus) as usize;
    let lower: f64 = count[..=w].iter().sum::<f64>() / all;
    let upper: f64 = count[w..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_bonferroni(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in idx.iter().enumerate() {
        running = running.max(((m - j) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub average_ranks: Vec<f64>,
    /// Holm-adjusted pairwise Wilcoxon p-values, symmetric with a unit
    /// diagonal.
    pub p_adjusted: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl RankTable {
    pub fn significant(&self, i: usize, j: usize) -> bool {
        i != j && self.p_adjusted[i][j] < self.alpha
    }
}

/// Average per-dataset ranks of `scores[method][dataset]` (rank 1 is best)
/// with Holm-adjusted pairwise Wilcoxon tests at level 0.05.
pub fn average_ranks(methods: &[String], scores: &[Vec<f64>], direction: Direction) -> RankTable {
    let k = scores.len();
    assert_eq!(methods.len(), k, "one score row per method");
    let nd = scores.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; k];
    for dset in 0..nd {
        let col: Vec<f64> = scores
            .iter()
            .map(|row| match direction {
                Direction::LowerBetter => row[dset],
                Direction::HigherBetter => -row[dset],
            })
            .collect();
        for (s, r) in sums.iter_mut().zip(fractional_ranks(&col)) {
            *s += r;
        }
    }
    let average_ranks = sums.iter().map(|s| if nd == 0 { 0.0 } else { s / nd as f64 }).collect();
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((i, j));
            raw.push(wilcoxon_signed_rank(&scores[i], &scores[j]).p);
        }
    }
    let adj = holm_bonferroni(&raw);
    let mut p_adjusted = vec![vec![1.0; k]; k];
    for ((i, j), p) in pairs.into_iter().zip(adj) {
        p_adjusted[i][j] = p;
        p_adjusted[j][i] = p;
    }
    RankTable { methods: methods.to_vec(), average_ranks, p_adjusted, alpha: 0.05 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries() {
        let s = median_iqr("g", &[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!((s.median, s.iqr, s.n), (3.0, 2.0, 5));
        assert_eq!(median_iqr("g", &[7.0]).iqr, 0.0);
        assert_eq!(median_iqr("g", &[1.0, 2.0, 3.0, 4.0]).median, 2.5);
    }

    #[test]
    fn exact_small_case() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]);
        assert_eq!(r.p, 0.0625);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        let z = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]);
        assert!(z.degenerate && z.p == 1.0);
        let a = [0.3, -1.2, 2.0, 0.1, 0.5, -0.4];
        let b = [0.0; 6];
        assert_eq!(wilcoxon_signed_rank(&a, &b).p, wilcoxon_signed_rank(&b, &a).p);
    }

    #[test]
    fn holm() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04]), vec![0.02, 0.04]);
        assert_eq!(holm_bonferroni(&[0.3]), vec![0.3]);
        assert_eq!(holm_bonferroni(&[0.6, 0.5, 0.01]), vec![1.0, 1.0, 0.03]);
    }

    #[test]
    fn ranks_hand_case() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| String::from(*s)).collect();
        // Dataset 1: a < b = c. Dataset 2: c < a < b.
        let t = average_ranks(&names, &[vec![1.0, 5.0], vec![2.0, 6.0], vec![2.0, 0.0]], Direction::LowerBetter);
        assert_eq!(t.average_ranks, vec![1.5, 2.75, 1.75]);
        let h = average_ranks(&names, &[vec![1.0, 5.0], vec![2.0, 6.0], vec![2.0, 0.0]], Direction::HigherBetter);
        assert_eq!(h.average_ranks, vec![2.5, 1.25, 2.25]);
        assert_eq!(t.p_adjusted[0][1], t.p_adjusted[1][0]);
    }
}
