use exbench_core::dataset::{generate, registry};
use exbench_core::explainers::{explain, ig_local, shap_local, Background, ExplainerConfig, ExplainerKind, Scope};
use exbench_core::expr::parse;
use exbench_core::metrics::{cosine_quality, nmse_quality, truth_explanation, truth_model};
use exbench_core::regressors::{fit, fit_linear, FittedModel, HyperParams, Model, ModelKind, ModelMeta};
use exbench_core::rng::rng;
use exbench_core::Matrix;
use rand::Rng;

fn cubic_data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|v| v[0] * v[1] + (v[2]).sin() + 0.5 * v[0]).collect();
    (Matrix::from_rows(&rows), y)
}

fn small_hyper(kind: ModelKind) -> HyperParams {
    match kind {
        ModelKind::Itea => HyperParams::new().with("popsize", 20.0).with("gens", 10.0),
        ModelKind::GpNls => HyperParams::new().with("population_size", 20.0).with("generations", 5.0),
        ModelKind::Forest => HyperParams::new().with("n_estimators", 10.0),
        ModelKind::Knn => HyperParams::new().with("n_neighbors", 5.0),
        ModelKind::Lasso => HyperParams::new().with("alpha", 0.01),
        _ => HyperParams::new(),
    }
}

#[test]
fn exact_shap_is_efficient_for_every_regressor() {
    let (x, y) = cubic_data(200, 1);
    let means = x.column_means();
    for kind in ModelKind::REGRESSORS {
        let m = fit(kind, &x, &y, &small_hyper(kind), 3).unwrap();
        let fbar = m.predict(&means);
        for i in 0..30 {
            let p = x.row(i);
            let phi = shap_local(&m, &means, p, 10, 0, 0);
            let gap = m.predict(p) - fbar;
            assert!((phi.iter().sum::<f64>() - gap).abs() <= 1e-9, "{kind}");
        }
    }
}

#[test]
fn shap_of_ols_is_coefficient_times_offset() {
    let (x, y) = cubic_data(200, 2);
    let m = fit_linear(&x, &y).unwrap();
    let means = x.column_means();
    let tree = m.symbolic().unwrap();
    let beta: Vec<f64> = (0..3)
        .map(|j| tree.differentiate(exbench_core::expr::Wrt::Var(j)).unwrap().evaluate(&means, &[]).unwrap())
        .collect();
    for i in 0..30 {
        let p = x.row(i);
        let phi = shap_local(&m, &means, p, 10, 0, 0);
        for j in 0..3 {
            assert!((phi[j] - beta[j] * (p[j] - means[j])).abs() <= 1e-8);
        }
    }
}

#[test]
fn integrated_gradients_completeness() {
    let m = FittedModel::from_expr(
        ModelKind::Truth,
        3,
        parse("sin(a*b) + exp(c/3)*a - b^2", &["a", "b", "c"]).unwrap(),
        ModelMeta::default(),
    )
    .unwrap();
    let base = [0.1, -0.3, 0.5];
    let x = [1.3, 0.8, -1.1];
    let v = ig_local(&m, &base, &x, 128);
    let oracle = ig_local(&m, &base, &x, 100_000);
    for (a, b) in v.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-3);
    }
    let gap = m.predict(&x) - m.predict(&base);
    assert!((oracle.iter().sum::<f64>() - gap).abs() <= 1e-6);
}

#[test]
fn truth_against_itself_is_perfect() {
    let reg = registry();
    let gt = reg.iter().find(|g| g.name == "feynman-I.12.11").unwrap();
    let (train, test) = generate(gt, 5).unwrap();
    let data = Background { x: &train.x, y: &train.y };
    let cfg = ExplainerConfig::default();
    for kind in ExplainerKind::ALL {
        for scope in [Scope::Local, Scope::Global] {
            if !kind.supports(scope) {
                continue;
            }
            let point = (scope == Scope::Local).then(|| test.x.row(0));
            let a = truth_explanation(gt, kind, scope, data, point, &cfg, 11).unwrap();
            let b = truth_explanation(gt, kind, scope, data, point, &cfg, 11).unwrap();
            let c = cosine_quality(&a.values, &b.values);
            let n = nmse_quality(&a.values, &b.values);
            assert!((c.value - 1.0).abs() < 1e-12 || c.degenerate, "{kind} {scope}");
            assert_eq!(n.value, 0.0, "{kind} {scope}");
        }
    }
}

#[test]
fn pe_truth_on_linear_and_absent_variables() {
    let reg = registry();
    let lin = reg.iter().find(|g| g.name == "linear-2d").unwrap();
    let (tr, _) = generate(lin, 1).unwrap();
    let e = truth_explanation(lin, ExplainerKind::Pe, Scope::Local, Background { x: &tr.x, y: &tr.y }, Some(&[0.3, 0.9]), &ExplainerConfig::default(), 0)
        .unwrap();
    assert_eq!(e.values, vec![3.0, 2.0]);
    let korns = reg.iter().find(|g| g.name == "korns-11").unwrap();
    let (tr, te) = generate(korns, 1).unwrap();
    let model = truth_model(korns).unwrap();
    for p in te.x.rows().take(10) {
        let e = explain(ExplainerKind::Pe, Scope::Local, &model, Background { x: &tr.x, y: &tr.y }, Some(p), &ExplainerConfig::default(), 0)
            .unwrap();
        assert!(e.values[1..].iter().all(|v| *v == 0.0));
    }
}

#[test]
fn explanations_are_deterministic_and_sized() {
    let (x, y) = cubic_data(120, 9);
    let m = fit(ModelKind::Forest, &x, &y, &small_hyper(ModelKind::Forest), 1).unwrap();
    let data = Background { x: &x, y: &y };
    let cfg = ExplainerConfig { shap_samples: 16, lime_samples: 100, morris_trajectories: 10, ..ExplainerConfig::default() };
    for kind in ExplainerKind::ALL {
        for scope in [Scope::Local, Scope::Global] {
            if !kind.supports(scope) {
                continue;
            }
            let p = (scope == Scope::Local).then(|| x.row(3));
            let a = explain(kind, scope, &m, data, p, &cfg, 4);
            if kind.needs_symbolic() {
                assert!(a.is_err());
                continue;
            }
            let a = a.unwrap();
            assert_eq!(a.values.len(), 3);
            assert_eq!(a, explain(kind, scope, &m, data, p, &cfg, 4).unwrap(), "{kind} {scope}");
        }
    }
}
