use exbench_core::metrics::{neighborhood, robustness};
use exbench_core::regressors::{fit_linear, Model};
use exbench_core::rng::rng;
use exbench_core::stats::{average_ranks, holm_bonferroni, median_iqr, wilcoxon_signed_rank, Direction, WilcoxonMethod};
use exbench_core::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn correlated(n: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            vec![a, 0.5 * a + b, 3.0 * b]
        })
        .collect();
    Matrix::from_rows(&rows)
}

#[test]
fn neighborhood_covariance_matches_target() {
    let t = correlated(300, 1);
    let n = neighborhood(&[0.2, -0.1, 1.0], &t, 0.01, 100_000, 7);
    let got = n.points.covariance();
    let want = t.covariance();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            diff += (got[(i, j)] - 0.01 * want[(i, j)]).powi(2);
            norm += (0.01 * want[(i, j)]).powi(2);
        }
    }
    assert!(diff.sqrt() < 0.05 * norm.sqrt());
}

#[test]
fn wilcoxon_exact_and_normal_agree_at_cutoff() {
    let mut r = rng(3);
    for _ in 0..20 {
        let a: Vec<f64> = (0..25).map(|_| r.random_range(-1.0..1.2)).collect();
        let b: Vec<f64> = (0..25).map(|_| r.random_range(-1.0..1.0)).collect();
        let exact = wilcoxon_signed_rank(&a, &b);
        assert_eq!(exact.method, WilcoxonMethod::Exact);
        // A zero difference is dropped, so the test stays exact.
        let mut a26 = a.clone();
        a26.push(0.0);
        let mut b26 = b.clone();
        b26.push(0.0);
        assert_eq!(wilcoxon_signed_rank(&a26, &b26).p, exact.p);
        let approx = normal_p(&a, &b);
        assert!((approx - exact.p).abs() <= 0.02, "{approx} vs {}", exact.p);
    }
}

/// Normal approximation computed independently from the library.
fn normal_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let w: f64 = idx.iter().enumerate().filter(|(_, &i)| d[i] > 0.0).map(|(r, _)| (r + 1) as f64).sum();
    let n = d.len() as f64;
    let z = ((w - n * (n + 1.0) / 4.0).abs() - 0.5) / (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0).sqrt();
    2.0 * 0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[test]
fn linear_pe_is_perfectly_robust() {
    let t = correlated(200, 2);
    let y: Vec<f64> = t.rows().map(|r| 2.0 * r[0] - r[1] + 0.5 * r[2] + 1.0).collect();
    let m = fit_linear(&t, &y).unwrap();
    let n = neighborhood(t.row(0), &t, 0.001, 30, 1);
    let r = robustness(&m, |p| Ok(m.gradient(p).unwrap()), &n, 1).unwrap();
    assert_eq!(r.stability, 0.0);
    assert!(r.infidelity < 1e-20);
    assert_eq!(r.jaccard, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn robustness_ranges(seed in any::<u64>(), lambda in 1e-4f64..1.0) {
        let t = correlated(50, seed);
        let y: Vec<f64> = t.rows().map(|r| r[0] * r[1]).collect();
        let m = fit_linear(&t, &y).unwrap();
        let n = neighborhood(t.row(1), &t, lambda, 10, seed);
        let r = robustness(&m, |p| Ok(p.iter().map(|v| v.sin()).collect()), &n, 1).unwrap();
        prop_assert!(r.stability >= 0.0 && r.infidelity >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.jaccard));
    }

    #[test]
    fn holm_never_decreases(p in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
        let adj = holm_bonferroni(&p);
        for (a, q) in adj.iter().zip(&p) {
            prop_assert!(*a >= *q && *a <= 1.0);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn wilcoxon_is_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 1..40), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.9 + shift + (i as f64).sin()).collect();
        let x = wilcoxon_signed_rank(&a, &b);
        prop_assert_eq!(x.p, wilcoxon_signed_rank(&b, &a).p);
        prop_assert!((0.0..=1.0).contains(&x.p));
    }

    #[test]
    fn ranks_invariant_under_monotone_maps(scores in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 3)) {
        let names: Vec<String> = (0..3).map(|i| format!("m{i}")).collect();
        let mapped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|v| v.exp() * 2.0 + 1.0).collect()).collect();
        let a = average_ranks(&names, &scores, Direction::LowerBetter);
        let b = average_ranks(&names, &mapped, Direction::LowerBetter);
        prop_assert_eq!(&a.average_ranks, &b.average_ranks);
        prop_assert!(a.average_ranks.iter().all(|r| (1.0..=3.0).contains(r)));
    }

    #[test]
    fn iqr_is_nonnegative(v in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
        let s = median_iqr("g", &v);
        prop_assert!(s.iqr >= 0.0);
    }
}
