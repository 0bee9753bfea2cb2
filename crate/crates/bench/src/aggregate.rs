use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use exbench_core::explainers::{ExplainerKind, Scope};
use exbench_core::regressors::ModelKind;
use exbench_core::stats::{average_ranks, median_iqr, Direction, RankTable};
use serde::{Deserialize, Serialize};

use crate::io;
use crate::records::{ExplainStatus, Measure, RunRecord};
use crate::BenchError;

/// Marker for pairs that were never evaluated.
pub const MISSING: &str = "—";

/// Median and IQR of one group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub median: f64,
    pub iqr: f64,
    pub n: usize,
}

impl Cell {
    pub fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| {
            let s = median_iqr("", values);
            Self { median: s.median, iqr: s.iqr, n: s.n }
        })
    }

    pub fn render(&self) -> String {
        format!("{} ± {}", fmt_num(self.median), fmt_num(self.iqr))
    }
}

pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Regressor x explainer table of one measure in one scope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub measure: Measure,
    pub scope: Scope,
    pub regressors: Vec<ModelKind>,
    pub explainers: Vec<ExplainerKind>,
    /// `cells[r][e]`; `None` where the pair was skipped or failed everywhere.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl Heatmap {
    /// Column of the best median in row `r`.
    pub fn best(&self, r: usize) -> Option<usize> {
        let better = |a: f64, b: f64| if self.measure.higher_is_better() { a > b } else { a < b };
        let mut best: Option<(usize, f64)> = None;
        for (e, c) in self.cells[r].iter().enumerate() {
            if let Some(c) = c {
                if best.is_none_or(|(_, b)| better(c.median, b)) {
                    best = Some((e, c.median));
                }
            }
        }
        best.map(|(e, _)| e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub regressor: ModelKind,
    pub dataset: String,
    pub mae: Cell,
    pub nmse: Cell,
    pub r2: Cell,
    pub size: Option<Cell>,
    /// Fraction of repetitions whose expression matched the truth.
    pub hit_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub measure: Measure,
    pub scope: Scope,
    /// Dataset x regressor blocks in which every ranked explainer was scored.
    pub blocks: usize,
    pub table: RankTable,
}

/// Everything derived from a record stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub failures: usize,
    pub regressors: Vec<ModelKind>,
    pub explainers: Vec<ExplainerKind>,
    pub heatmaps: Vec<Heatmap>,
    pub accuracy: Vec<AccuracyRow>,
    pub ranks: Vec<RankEntry>,
    /// Median explanation seconds, `timing[r][e]`.
    pub timing: Vec<Vec<Option<f64>>>,
    /// Conventions used by the significance tests.
    pub conventions: BTreeMap<String, String>,
}

/// Per-record value of `measure`: the mean over local points, or the global
/// score.
fn record_value(r: &RunRecord, kind: ExplainerKind, scope: Scope, m: Measure) -> Option<f64> {
    let e = r.explanation(kind, scope)?;
    if !e.is_ok() {
        return None;
    }
    e.mean(m)
}

pub fn aggregate(records: &[RunRecord]) -> Result<Summary, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let failures = records.len() - ok.len();
    let regressors: Vec<ModelKind> = records.iter().map(|r| r.regressor).collect::<BTreeSet<_>>().into_iter().collect();
    let explainers: Vec<ExplainerKind> =
        records.iter().flat_map(|r| r.explanations.iter().map(|e| e.explainer)).collect::<BTreeSet<_>>().into_iter().collect();

    let mut heatmaps = Vec::new();
    let mut ranks = Vec::new();
    for scope in [Scope::Local, Scope::Global] {
        for m in Measure::ALL {
            if m.is_robustness() && scope == Scope::Global {
                continue;
            }
            let cells = regressors
                .iter()
                .map(|&reg| {
                    explainers
                        .iter()
                        .map(|&ex| {
                            let v: Vec<f64> =
                                ok.iter().filter(|r| r.regressor == reg).filter_map(|r| record_value(r, ex, scope, m)).collect();
                            Cell::of(&v)
                        })
                        .collect()
                })
                .collect();
            let hm = Heatmap { measure: m, scope, regressors: regressors.clone(), explainers: explainers.clone(), cells };
            if hm.cells.iter().flatten().any(Option::is_some) {
                heatmaps.push(hm);
            }
            if let Some(entry) = rank_entry(&ok, &explainers, scope, m) {
                ranks.push(entry);
            }
        }
    }

    let mut accuracy = Vec::new();
    let datasets: Vec<String> = ok.iter().map(|r| r.dataset.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    for &reg in &regressors {
        for ds in &datasets {
            let rs: Vec<&&RunRecord> = ok.iter().filter(|r| r.regressor == reg && &r.dataset == ds).collect();
            let acc: Vec<_> = rs.iter().filter_map(|r| r.accuracy).collect();
            if acc.is_empty() {
                continue;
            }
            let col = |f: fn(&crate::records::Accuracy) -> f64| Cell::of(&acc.iter().map(f).collect::<Vec<_>>()).expect("non-empty");
            let sizes: Vec<f64> = rs.iter().filter_map(|r| r.size.map(|s| s as f64)).collect();
            let hits: Vec<bool> = rs.iter().filter_map(|r| r.hit).collect();
            accuracy.push(AccuracyRow {
                regressor: reg,
                dataset: ds.clone(),
                mae: col(|a| a.mae),
                nmse: col(|a| a.nmse),
                r2: col(|a| a.r2),
                size: Cell::of(&sizes),
                hit_rate: (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64),
            });
        }
    }

    let timing = regressors
        .iter()
        .map(|&reg| {
            explainers
                .iter()
                .map(|&ex| {
                    let v: Vec<f64> = ok
                        .iter()
                        .filter(|r| r.regressor == reg)
                        .flat_map(|r| r.explanations.iter().filter(|e| e.explainer == ex && e.status == ExplainStatus::Ok))
                        .map(|e| e.seconds)
                        .collect();
                    Cell::of(&v).map(|c| c.median)
                })
                .collect()
        })
        .collect();

    let conventions = [
        ("wilcoxon_zero_differences", "dropped"),
        ("wilcoxon_ties", "mid-ranks; tie-corrected variance in the normal approximation"),
        ("wilcoxon_exact_up_to", "25"),
        ("multiple_testing", "holm"),
        ("alpha", "0.05"),
        ("quantiles", "linear interpolation"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    Ok(Summary { records: ok.len(), failures, regressors, explainers, heatmaps, accuracy, ranks, timing, conventions })
}

/// Explainers ranked over dataset x regressor blocks, each block scored by
/// the median over repetitions.
fn rank_entry(ok: &[&RunRecord], explainers: &[ExplainerKind], scope: Scope, m: Measure) -> Option<RankEntry> {
    let mut blocks: BTreeMap<(String, ModelKind), BTreeMap<ExplainerKind, Vec<f64>>> = BTreeMap::new();
    for r in ok {
        for &ex in explainers {
            if let Some(v) = record_value(r, ex, scope, m) {
                blocks.entry((r.dataset.clone(), r.regressor)).or_default().entry(ex).or_default().push(v);
            }
        }
    }
    // Explainers scored in every block where they appear at least once.
    let ranked: Vec<ExplainerKind> =
        explainers.iter().copied().filter(|ex| blocks.values().filter(|b| b.contains_key(ex)).count() > 0).collect();
    let complete: Vec<&BTreeMap<ExplainerKind, Vec<f64>>> =
        blocks.values().filter(|b| ranked.iter().all(|ex| b.contains_key(ex))).collect();
    if ranked.len() < 2 || complete.is_empty() {
        return None;
    }
    let scores: Vec<Vec<f64>> = ranked
        .iter()
        .map(|ex| complete.iter().map(|b| median_iqr("", &b[ex]).median).collect())
        .collect();
    let names: Vec<String> = ranked.iter().map(|e| e.to_string()).collect();
    let dir = if m.higher_is_better() { Direction::HigherBetter } else { Direction::LowerBetter };
    Some(RankEntry { measure: m, scope, blocks: complete.len(), table: average_ranks(&names, &scores, dir) })
}

/// Writes the summary as JSON plus plot-ready CSV tables.
pub fn write_summary(dir: &Path, s: &Summary) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut written = vec![dir.join("summary.json")];
    io::write_json(&written[0], s)?;
    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| BenchError::csv(&p, e)
    };
    for h in &s.heatmaps {
        let path = dir.join(format!("heatmap_{}_{}.csv", h.measure.id(), h.scope));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["regressor", "explainer", "median", "iqr", "n", "cell", "best"]).map_err(csv_err(&path))?;
        for (ri, reg) in h.regressors.iter().enumerate() {
            let best = h.best(ri);
            for (ei, ex) in h.explainers.iter().enumerate() {
                let rec = match &h.cells[ri][ei] {
                    Some(c) => [
                        reg.to_string(),
                        ex.to_string(),
                        c.median.to_string(),
                        c.iqr.to_string(),
                        c.n.to_string(),
                        c.render(),
                        (best == Some(ei)).to_string(),
                    ],
                    None => [reg.to_string(), ex.to_string(), String::new(), String::new(), "0".into(), MISSING.into(), "false".into()],
                };
                w.write_record(&rec).map_err(csv_err(&path))?;
            }
        }
        w.flush().map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("accuracy.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["regressor", "dataset", "mae", "nmse", "r2", "size", "hit_rate", "mae_median", "nmse_median", "r2_median"])
        .map_err(csv_err(&path))?;
    for a in &s.accuracy {
        w.write_record([
            a.regressor.to_string(),
            a.dataset.clone(),
            a.mae.render(),
            a.nmse.render(),
            a.r2.render(),
            a.size.map_or(MISSING.into(), |c| c.render()),
            a.hit_rate.map_or(MISSING.into(), |h| format!("{h:.3}")),
            a.mae.median.to_string(),
            a.nmse.median.to_string(),
            a.r2.median.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    written.push(path);
    for r in &s.ranks {
        let stem = format!("{}_{}", r.measure.id(), r.scope);
        let path = dir.join(format!("ranks_{stem}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["explainer", "average_rank"]).map_err(csv_err(&path))?;
        for (m, a) in r.table.methods.iter().zip(&r.table.average_ranks) {
            w.write_record([m.clone(), a.to_string()]).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
        let path = dir.join(format!("pvalues_{stem}.json"));
        io::write_json(&path, &r.table)?;
        written.push(path);
    }
    let path = dir.join("timing.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header = vec!["regressor".to_string()];
    header.extend(s.explainers.iter().map(|e| e.to_string()));
    w.write_record(&header).map_err(csv_err(&path))?;
    for (reg, row) in s.regressors.iter().zip(&s.timing) {
        let mut rec = vec![reg.to_string()];
        rec.extend(row.iter().map(|t| t.map_or(MISSING.into(), fmt_num)));
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
