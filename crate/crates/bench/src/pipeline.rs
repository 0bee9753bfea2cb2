use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use exbench_core::dataset::{generate_with, parse_manifest, registry, Dataset, GenerateOptions, GroundTruth};
use exbench_core::explainers::{explain, Background, ExplainError, ExplainerKind, Explanation, Scope};
use exbench_core::expr::is_hit;
use exbench_core::metrics::{
    cosine_quality, mae, neighborhood_with_cov, nmse_pred, nmse_quality, r2, robustness, truth_model, Neighborhood,
};
use exbench_core::regressors::{fit, grid_search, FittedModel, GridResult, HyperParams, Model, ModelKind};
use exbench_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::io;
use crate::records::{Accuracy, CellStatus, ExplainStatus, ExplainerRecord, PointScores, RunRecord};
use crate::BenchError;

/// A ground truth with its generated train and test sets.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub truth: GroundTruth,
    pub train: Dataset,
    pub test: Dataset,
}

/// Registry entries selected by the configuration, in configuration order.
pub fn select_truths(cfg: &ExperimentConfig) -> Result<Vec<GroundTruth>, BenchError> {
    let mut all = registry();
    if let Some(path) = &cfg.manifest {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        all.extend(parse_manifest(&text)?);
    }
    if cfg.datasets.is_empty() {
        return Ok(all);
    }
    cfg.datasets
        .iter()
        .map(|name| {
            all.iter()
                .find(|g| &g.name == name)
                .cloned()
                .ok_or_else(|| BenchError::Config(format!("unknown dataset `{name}`")))
        })
        .collect()
}

pub fn dataset_seed(cfg: &ExperimentConfig, name: &str) -> u64 {
    derive_seed(cfg.seed, &["data", name])
}

/// Draws every selected dataset.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Vec<Prepared>, BenchError> {
    let opts = GenerateOptions { grid_cap: cfg.grid_cap, grid_subsample: cfg.grid_subsample };
    select_truths(cfg)?
        .into_iter()
        .map(|truth| {
            let (train, test) = generate_with(&truth, dataset_seed(cfg, &truth.name), &opts)?;
            Ok(Prepared { truth, train, test })
        })
        .collect()
}

fn data_path(dir: &Path, name: &str, part: &str) -> PathBuf {
    dir.join("data").join(format!("{name}.{part}.csv"))
}

pub fn save_datasets(dir: &Path, data: &[Prepared]) -> Result<Vec<PathBuf>, BenchError> {
    let d = dir.join("data");
    std::fs::create_dir_all(&d).map_err(|e| BenchError::io(&d, e))?;
    let mut written = Vec::new();
    for p in data {
        for (part, ds) in [("train", &p.train), ("test", &p.test)] {
            let path = data_path(dir, &p.truth.name, part);
            io::write_dataset(&path, ds)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Reads the datasets written by [`save_datasets`].
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<Prepared>, BenchError> {
    let dir = &cfg.output_dir;
    select_truths(cfg)?
        .into_iter()
        .map(|truth| {
            let load = |part: &str| -> Result<Dataset, BenchError> {
                let path = data_path(dir, &truth.name, part);
                let (names, x, y) = io::read_table(&path)?;
                if names != truth.space.names {
                    return Err(BenchError::Format(format!("{}: columns do not match the equation", path.display())));
                }
                Ok(Dataset { x, y, space: truth.space.clone(), source: part.into(), seed: dataset_seed(cfg, &truth.name) })
            };
            Ok(Prepared { train: load("train")?, test: load("test")?, truth })
        })
        .collect()
}

/// Tuning outcome for one dataset and regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningEntry {
    pub dataset: String,
    pub regressor: ModelKind,
    pub seed: u64,
    pub result: GridResult,
}

/// Grid search for every dataset and regressor.
pub fn tune(cfg: &ExperimentConfig, data: &[Prepared]) -> Result<Vec<TuningEntry>, BenchError> {
    let mut out = Vec::new();
    for p in data {
        for spec in &cfg.regressors {
            let seed = derive_seed(cfg.seed, &["tune", &p.truth.name, spec.id.id()]);
            log::info!("tuning {} on {}", spec.id, p.truth.name);
            let result = grid_search(spec.id, &spec.hyper_grid(), &p.train.x, &p.train.y, seed)?;
            out.push(TuningEntry { dataset: p.truth.name.clone(), regressor: spec.id, seed, result });
        }
    }
    Ok(out)
}

pub fn save_tuning(dir: &Path, entries: &[TuningEntry]) -> Result<(), BenchError> {
    io::write_json(&dir.join("tuning.json"), &entries)?;
    let path = dir.join("cv_table.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| BenchError::csv(&path, e))?;
    w.write_record(["dataset", "regressor", "cell", "hyper", "fold1", "fold2", "fold3", "mean_r2", "selected"])
        .map_err(|e| BenchError::csv(&path, e))?;
    for t in entries {
        for (i, row) in t.result.rows.iter().enumerate() {
            let fold = |k: usize| row.fold_r2.get(k).copied().flatten().map_or(String::new(), |v| v.to_string());
            let rec = [
                t.dataset.clone(),
                t.regressor.to_string(),
                i.to_string(),
                row.hyper.to_string(),
                fold(0),
                fold(1),
                fold(2),
                row.mean_r2.map_or(String::new(), |v| v.to_string()),
                (i == t.result.best_index).to_string(),
            ];
            w.write_record(&rec).map_err(|e| BenchError::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| BenchError::io(&path, e))
}

pub fn load_tuning(dir: &Path) -> Result<Vec<TuningEntry>, BenchError> {
    io::read_json(&dir.join("tuning.json"))
}

/// One dataset x regressor x repetition unit of work.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub dataset: usize,
    pub regressor: ModelKind,
    pub hyper: HyperParams,
    pub repetition: usize,
    pub seed: u64,
}

/// Cells in run order: datasets, then regressors, then repetitions.
pub fn cells(cfg: &ExperimentConfig, data: &[Prepared], tuning: &[TuningEntry]) -> Result<Vec<Cell>, BenchError> {
    let mut out = Vec::new();
    for (di, p) in data.iter().enumerate() {
        for spec in &cfg.regressors {
            let name = &p.truth.name;
            let hyper = tuning
                .iter()
                .find(|t| &t.dataset == name && t.regressor == spec.id)
                .map(|t| t.result.best.clone())
                .ok_or_else(|| BenchError::Config(format!("no tuning result for {name}/{}", spec.id)))?;
            for rep in 0..cfg.repetitions_for(spec.id) {
                let seed = derive_seed(cfg.seed, &[name, spec.id.id(), &rep.to_string()]);
                out.push(Cell { dataset: di, regressor: spec.id, hyper: hyper.clone(), repetition: rep, seed });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub failures: usize,
}

/// Runs every cell on `cfg.workers` threads. Records reach `sink` in cell
/// order whatever the scheduling; a panicking cell yields a failure record.
pub fn run<S>(cfg: &ExperimentConfig, data: &[Prepared], tuning: &[TuningEntry], mut sink: S) -> Result<RunOutcome, BenchError>
where
    S: FnMut(&RunRecord) -> Result<(), BenchError>,
{
    let cells = cells(cfg, data, tuning)?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
    let mut records: Vec<Option<RunRecord>> = vec![None; cells.len()];
    let mut flushed = 0;
    let mut failures = 0;
    std::thread::scope(|s| -> Result<(), BenchError> {
        for _ in 0..cfg.workers.min(cells.len()).max(1) {
            let tx = tx.clone();
            let (cells, next) = (&cells, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let rec = isolated(cfg, &data[cell.dataset], cell);
                if tx.send((i, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, rec) in rx {
            records[i] = Some(rec);
            while flushed < records.len() {
                let Some(r) = &records[flushed] else { break };
                if !r.is_ok() {
                    failures += 1;
                }
                sink(r)?;
                flushed += 1;
            }
        }
        Ok(())
    })?;
    Ok(RunOutcome { records: records.into_iter().flatten().collect(), failures })
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

fn blank(p: &Prepared, cell: &Cell) -> RunRecord {
    RunRecord {
        dataset: p.truth.name.clone(),
        regressor: cell.regressor,
        hyper: cell.hyper.clone(),
        repetition: cell.repetition,
        seed: cell.seed,
        status: CellStatus::Ok,
        fit_seconds: 0.0,
        accuracy: None,
        size: None,
        hit: None,
        expression: None,
        model_flags: Vec::new(),
        explanations: Vec::new(),
    }
}

/// [`run_cell`] with panics and errors turned into failure records.
pub fn isolated(cfg: &ExperimentConfig, p: &Prepared, cell: &Cell) -> RunRecord {
    match panic::catch_unwind(AssertUnwindSafe(|| run_cell(cfg, p, cell))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => RunRecord { status: CellStatus::Failed { error: e.to_string() }, ..blank(p, cell) },
        Err(payload) => {
            let error = format!("panic: {}", panic_message(payload.as_ref()));
            log::error!("cell {} failed: {error}", blank(p, cell).cell_id());
            RunRecord { status: CellStatus::Failed { error }, ..blank(p, cell) }
        }
    }
}

/// Fits, scores and explains one cell.
pub fn run_cell(cfg: &ExperimentConfig, p: &Prepared, cell: &Cell) -> Result<RunRecord, BenchError> {
    let mut rec = blank(p, cell);
    if cfg.fault_injection.iter().any(|c| *c == rec.cell_id()) {
        panic!("injected fault in {}", rec.cell_id());
    }
    let start = Instant::now();
    let model = fit(cell.regressor, &p.train.x, &p.train.y, &cell.hyper, cell.seed)?;
    rec.fit_seconds = start.elapsed().as_secs_f64();
    let yhat = model.predict_batch(&p.test.x);
    let (n, r) = (nmse_pred(&yhat, &p.test.y), r2(&yhat, &p.test.y));
    rec.accuracy =
        Some(Accuracy { mae: mae(&yhat, &p.test.y), nmse: n.value, r2: r.value, degenerate: n.degenerate || r.degenerate });
    rec.size = model.size();
    if let Some(form) = model.symbolic() {
        rec.hit = Some(is_hit(form, &p.truth.tree, &p.truth.space).hit());
        rec.expression = Some(form.render(&p.truth.space.name_refs()));
    }
    rec.model_flags = model.meta.flags.clone();
    let truth = truth_model(&p.truth)?;
    let ctx = Context::new(cfg, p, &model, &truth, cell.seed);
    for &kind in &cfg.explainers {
        for scope in [Scope::Global, Scope::Local] {
            if !kind.supports(scope) {
                continue;
            }
            let er = if kind.needs_symbolic() && model.symbolic().is_none() {
                ExplainerRecord::skipped(kind, scope, format!("{kind} needs a symbolic model"))
            } else {
                ctx.explain(kind, scope)
            };
            rec.explanations.push(er);
        }
    }
    Ok(rec)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    p: &'a Prepared,
    model: &'a FittedModel,
    truth: &'a FittedModel,
    seed: u64,
    truth_seed: u64,
    points: Vec<&'a [f64]>,
    neighborhoods: Vec<Neighborhood>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig, p: &'a Prepared, model: &'a FittedModel, truth: &'a FittedModel, seed: u64) -> Self {
        let points: Vec<&[f64]> = p.test.x.rows().take(cfg.local_points).collect();
        let cov = p.train.x.covariance();
        let neighborhoods = points
            .iter()
            .enumerate()
            .map(|(i, x)| {
                neighborhood_with_cov(x, cov.clone(), cfg.lambda, cfg.neighbors, derive_seed(seed, &["neighborhood", &i.to_string()]))
            })
            .collect();
        Self { cfg, p, model, truth, seed, truth_seed: derive_seed(seed, &["truth"]), points, neighborhoods }
    }

    fn background(&self) -> Background<'a> {
        Background { x: &self.p.train.x, y: &self.p.train.y }
    }

    fn run(&self, m: &dyn Model, kind: ExplainerKind, scope: Scope, point: Option<&[f64]>, seed: u64) -> Result<Explanation, ExplainError> {
        explain(kind, scope, m, self.background(), point, &self.cfg.explainer, seed)
    }

    fn explain(&self, kind: ExplainerKind, scope: Scope) -> ExplainerRecord {
        let mut rec = ExplainerRecord::skipped(kind, scope, "");
        rec.status = ExplainStatus::Ok;
        let result = match scope {
            Scope::Global => self.global(kind, &mut rec),
            Scope::Local => self.local(kind, &mut rec),
        };
        if let Err(e) = result {
            rec.status = ExplainStatus::Failed { error: e };
            rec.values.clear();
            rec.truth.clear();
            rec.scores.clear();
        }
        rec.flags.sort();
        rec.flags.dedup();
        rec
    }

    fn global(&self, kind: ExplainerKind, rec: &mut ExplainerRecord) -> Result<(), String> {
        let start = Instant::now();
        let e = self.run(self.model, kind, Scope::Global, None, self.seed).map_err(|e| e.to_string())?;
        rec.seconds = start.elapsed().as_secs_f64();
        let t = self.run(self.truth, kind, Scope::Global, None, self.truth_seed).map_err(|e| e.to_string())?;
        rec.scores.push(quality(&t.values, &e.values));
        rec.flags.extend(e.flags);
        rec.values.push(e.values);
        rec.truth.push(t.values);
        check(rec)
    }

    fn local(&self, kind: ExplainerKind, rec: &mut ExplainerRecord) -> Result<(), String> {
        for (x, nb) in self.points.iter().zip(&self.neighborhoods) {
            let start = Instant::now();
            let e = self.run(self.model, kind, Scope::Local, Some(x), self.seed).map_err(|e| e.to_string())?;
            rec.seconds += start.elapsed().as_secs_f64();
            let t = self.run(self.truth, kind, Scope::Local, Some(x), self.truth_seed).map_err(|e| e.to_string())?;
            let explain_at = |z: &[f64]| self.run(self.model, kind, Scope::Local, Some(z), self.seed).map(|e| e.values);
            let r = robustness(self.model, explain_at, nb, self.cfg.jaccard_k.min(x.len())).map_err(|e| e.to_string())?;
            let mut s = quality(&t.values, &e.values);
            s.stability = Some(r.stability);
            s.infidelity = Some(r.infidelity);
            s.jaccard = Some(r.jaccard);
            rec.scores.push(s);
            rec.flags.extend(e.flags);
            rec.values.push(e.values);
            rec.truth.push(t.values);
        }
        check(rec)
    }
}

fn quality(truth: &[f64], expl: &[f64]) -> PointScores {
    let c = cosine_quality(truth, expl);
    let n = nmse_quality(truth, expl);
    PointScores {
        cosine: c.value,
        cosine_degenerate: c.degenerate,
        nmse: n.value,
        nmse_degenerate: n.degenerate,
        ..PointScores::default()
    }
}

fn check(rec: &ExplainerRecord) -> Result<(), String> {
    let finite = rec.scores.iter().all(|s| {
        [s.stability, s.infidelity, s.jaccard, Some(s.cosine), Some(s.nmse)].iter().flatten().all(|v| v.is_finite())
    });
    if finite {
        Ok(())
    } else {
        Err("non-finite score".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RegressorSpec;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec!["linear-2d".into()],
            regressors: vec![RegressorSpec::new(ModelKind::Linear), RegressorSpec::new(ModelKind::Knn)],
            explainers: vec![ExplainerKind::Pe, ExplainerKind::Shap, ExplainerKind::Random],
            local_points: 3,
            neighbors: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn incompatible_pairs_are_skipped() {
        let cfg = small();
        let data = prepare(&cfg).unwrap();
        let tuning = tune(&cfg, &data).unwrap();
        let out = run(&cfg, &data, &tuning, |_| Ok(())).unwrap();
        assert_eq!(out.failures, 0);
        let knn = out.records.iter().find(|r| r.regressor == ModelKind::Knn).unwrap();
        let pe = knn.explanation(ExplainerKind::Pe, Scope::Local).unwrap();
        assert!(matches!(pe.status, ExplainStatus::Skipped { .. }));
        let lin = out.records.iter().find(|r| r.regressor == ModelKind::Linear).unwrap();
        assert_eq!(lin.hit, Some(true));
        let pe = lin.explanation(ExplainerKind::Pe, Scope::Local).unwrap();
        assert_eq!(pe.scores.len(), 3);
        assert!(pe.scores.iter().all(|s| s.stability == Some(0.0)));
    }

    #[test]
    fn injected_fault_is_isolated() {
        let mut cfg = small();
        cfg.fault_injection = vec!["linear-2d/knn/0".into()];
        let data = prepare(&cfg).unwrap();
        let tuning = tune(&cfg, &data).unwrap();
        let out = run(&cfg, &data, &tuning, |_| Ok(())).unwrap();
        assert_eq!(out.failures, 1);
        assert_eq!(out.records.len(), 2);
        assert!(out.records[0].is_ok() && !out.records[1].is_ok());
    }
}
