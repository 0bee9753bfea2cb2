use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exbench::aggregate::{aggregate, write_summary, Summary};
use exbench::io::{self, JsonLines};
use exbench::pipeline::{load_datasets, load_tuning, prepare, run, save_datasets, save_tuning, tune};
use exbench::records::RunRecord;
use exbench::{report, BenchError, ExperimentConfig, RegressorSpec};
use exbench_core::explainers::ExplainerKind;
use exbench_core::regressors::ModelKind;

#[derive(Parser)]
#[command(name = "exbench", version, about = "Benchmark feature-importance explanations of regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    repetitions: Option<usize>,
    /// Neighborhood scale for the robustness measures.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Comma-separated dataset names.
    #[arg(long, global = true, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    /// Comma-separated regressor ids.
    #[arg(long, global = true, value_delimiter = ',')]
    regressors: Option<Vec<String>>,
    /// Comma-separated explainer ids.
    #[arg(long, global = true, value_delimiter = ',')]
    explainers: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Write train and test CSVs for the selected equations.
    Generate,
    /// Grid-search every regressor on every dataset.
    Tune,
    /// Fit, score and explain every cell; append records as JSON lines.
    Run,
    /// Summarize the records into median ± IQR tables.
    Aggregate,
    /// Print the aggregated tables as text.
    Report,
    /// Print the effective configuration.
    Config,
}

fn load_config(o: &Opts) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &o.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.workers {
        cfg.workers = v;
    }
    if let Some(v) = o.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = o.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = &o.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &o.datasets {
        cfg.datasets = v.clone();
    }
    if let Some(ids) = &o.regressors {
        let mut specs = Vec::new();
        for id in ids {
            let kind = ModelKind::from_id(id).ok_or_else(|| BenchError::Config(format!("unknown regressor `{id}`")))?;
            let existing = cfg.regressors.iter().find(|s| s.id == kind).cloned();
            specs.push(existing.unwrap_or_else(|| RegressorSpec::new(kind)));
        }
        cfg.regressors = specs;
    }
    if let Some(ids) = &o.explainers {
        cfg.explainers = ids
            .iter()
            .map(|id| ExplainerKind::from_id(id).ok_or_else(|| BenchError::Config(format!("unknown explainer `{id}`"))))
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool, BenchError> {
    let cfg = load_config(&cli.opts)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    match cli.command {
        Command::Config => print!("{}", cfg.to_toml()),
        Command::Generate => {
            let data = prepare(&cfg)?;
            for p in save_datasets(dir, &data)? {
                println!("{}", p.display());
            }
        }
        Command::Tune => {
            let data = load_datasets(&cfg)?;
            let entries = tune(&cfg, &data)?;
            save_tuning(dir, &entries)?;
            for t in &entries {
                println!("{} {}: {}", t.dataset, t.regressor, t.result.best);
            }
        }
        Command::Run => {
            let data = load_datasets(&cfg)?;
            let tuning = load_tuning(dir)?;
            let mut out = JsonLines::create(&dir.join("records.jsonl"))?;
            let outcome = run(&cfg, &data, &tuning, |r| {
                log::info!("finished {}", r.cell_id());
                out.write(r)
            })?;
            println!("{} records, {} failed", outcome.records.len(), outcome.failures);
            return Ok(outcome.failures == 0);
        }
        Command::Aggregate => {
            let records: Vec<RunRecord> = io::read_json_lines(&dir.join("records.jsonl"))?;
            let summary = aggregate(&records)?;
            for p in write_summary(dir, &summary)? {
                println!("{}", p.display());
            }
            return Ok(summary.failures == 0);
        }
        Command::Report => {
            let summary: Summary = io::read_json(&dir.join("summary.json"))?;
            let text = report::render(&summary)?;
            let path = dir.join("report.txt");
            std::fs::write(&path, &text).map_err(|e| BenchError::io(&path, e))?;
            print!("{text}");
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
