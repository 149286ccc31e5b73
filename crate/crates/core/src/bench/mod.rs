//! The benchmark: item loading, querying models, answer extraction,
//! per-task scoring and cross-model reports.

pub mod config;
pub mod evaluate;
pub mod extract;
pub mod items;
pub mod mock;
pub mod report;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::client::ChatClient;
use crate::formats::{write_jsonl, MalformedLine};

pub use config::{BenchConfig, EmbeddingConfig, ModelConfig, ModelKind, Resources};
pub use evaluate::{evaluate, EvalRun, ItemResult, ScoreOptions, Scorer, TaskSummary};
pub use extract::{Extraction, Extractor, Prediction};
pub use items::{
    check_official_counts, load_bench, load_bench_dir, parse_bench, parse_item, task_counts,
    CountCheck, Gold, LoadedBench, TaskItem, OFFICIAL_COUNTS, OFFICIAL_TOTAL,
};
pub use mock::mock_model;
pub use report::{radar, write_report, RadarPayload, Table};
pub use run::{run_model, summarize, ModelResponse, ResponseCache, RunOptions, RunSummary};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed benchmark item: {0}")]
    Malformed(MalformedLine),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

/// One model's results together with how they were obtained.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub run: EvalRun,
    pub responses: Vec<ModelResponse>,
    pub summary: RunSummary,
}

/// Queries one model and scores its answers.
pub fn bench_model(
    name: &str,
    items: &[TaskItem],
    client: &dyn ChatClient,
    resources: &Resources,
    opts: &RunOptions,
    config: &BenchConfig,
) -> ModelOutcome {
    let responses = run_model(items, client, opts);
    let summary = summarize(&responses);
    log::info!(
        "{name}: {} answered, {} unanswered, {} from cache, {} retries",
        summary.answered,
        summary.unanswered,
        summary.cache_hits,
        summary.retries
    );
    let scorer = Scorer {
        extractor: &resources.extractor,
        embedder: resources.embedder.as_deref(),
        options: config.scoring,
    };
    let run = evaluate(name, items, &responses, &scorer, config.seed, config.snapshot());
    ModelOutcome {
        run,
        responses,
        summary,
    }
}

/// File name used for a model's result files.
pub fn file_stem(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Runs every configured model over `items`, writing `runs/<model>.json`
/// and `responses/<model>.jsonl` under `out_dir`.
pub fn run_bench(
    config: &BenchConfig,
    items: &[TaskItem],
    out_dir: &Path,
) -> Result<Vec<ModelOutcome>, BenchError> {
    if config.models.is_empty() {
        return Err(BenchError::Config("no models configured".into()));
    }
    if items.is_empty() {
        return Err(BenchError::Invalid("no benchmark items".into()));
    }
    let resources = config.resources()?;
    let opts = config.run_options(resources.templates.clone())?;
    let runs_dir = out_dir.join("runs");
    let resp_dir = out_dir.join("responses");
    for d in [&runs_dir, &resp_dir] {
        fs::create_dir_all(d).map_err(|e| BenchError::io(d, e))?;
    }
    let mut outcomes = Vec::new();
    for model in &config.models {
        let client = config.client(model, items, &resources.templates)?;
        let outcome = bench_model(&model.name, items, client.as_ref(), &resources, &opts, config);
        let stem = file_stem(&model.name);
        let path = runs_dir.join(format!("{stem}.json"));
        fs::write(&path, outcome.run.to_json()).map_err(|e| BenchError::io(&path, e))?;
        let path = resp_dir.join(format!("{stem}.jsonl"));
        write_jsonl(&outcome.responses, &path).map_err(|e| BenchError::Invalid(e.to_string()))?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Reads back result files written by [`run_bench`].
pub fn load_runs(paths: &[PathBuf]) -> Result<Vec<EvalRun>, BenchError> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| BenchError::io(p, e))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| BenchError::Invalid(format!("{}: {e}", p.display())))
        })
        .collect()
}
