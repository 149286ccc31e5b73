//! `guwen`: corpus cleaning, instruction-data generation, benchmark
//! evaluation and reporting.
//!
//! Exit codes: 0 success, 1 validation failure, 2 IO or client failure,
//! 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use guwen::bench::{
    self, check_official_counts, load_bench, load_bench_dir, write_report, BenchConfig, BenchError,
    ModelConfig, TaskItem,
};
use guwen::corpus::{build_corpus, write_corpus, CorpusConfig};
use guwen::datagen::{self, run_pipeline, DatagenConfig, DatagenError, PipelineStage, TrainingStage};
use guwen::formats::{parse_entity_output, parse_records, parse_slash_tags, MalformedLine};

#[derive(Parser)]
#[command(name = "guwen", version, about = "Classical Chinese benchmark and instruction-data tools")]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, clean and deduplicate raw corpora.
    Clean(Common),
    /// Run the instruction-construction pipeline up to a stage.
    Datagen {
        #[command(flatten)]
        common: Common,
        /// Last stage to run: pairs, seed, expand, reverse, filter, pilot,
        /// generate or integrate.
        #[arg(long, default_value = "integrate")]
        stage: String,
    },
    /// Write the hyper-parameter file of a training stage.
    TrainConfig {
        /// pretrain or sft
        stage: String,
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Query models on benchmark items and score the answers.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Benchmark file or directory of `*.jsonl` files.
        #[arg(long)]
        bench: PathBuf,
        /// Mock model spec (`mock`, `mock:<noise>`, `<name>=mock:<noise>`),
        /// added to the configured models. Repeatable.
        #[arg(long)]
        model: Vec<String>,
        /// Check per-task item counts against the official split.
        #[arg(long)]
        official: bool,
    },
    /// Build result tables and radar data from evaluation runs.
    Report {
        #[command(flatten)]
        common: Common,
        /// EvalRun JSON files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Check a file against a format and report bad lines.
    Validate {
        #[command(flatten)]
        common: Common,
        /// bench, records, pos or ner
        #[arg(long, default_value = "bench")]
        kind: String,
        /// File to check.
        input: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Usage(_) => 64,
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Malformed(_) | BenchError::Config(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<DatagenError> for Failure {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Config(_) | DatagenError::InvalidRecord { .. } | DatagenError::Template(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(m) | Failure::Runtime(m) | Failure::Usage(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    v.as_deref().ok_or_else(|| Failure::Usage(format!("{flag} is required")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Clean(c) => clean(&c),
        Command::Datagen { common, stage } => {
            let stage: PipelineStage = stage.parse().map_err(Failure::Usage)?;
            let mut config = DatagenConfig::load(need(&common.config, "--config")?)?;
            if let Some(s) = common.seed {
                config.seed = s;
            }
            let out = need(&common.out, "--out")?;
            let report = run_pipeline(&config, out, stage)?;
            for (k, v) in &report.counts {
                println!("{k}\t{v}");
            }
            Ok(())
        }
        Command::TrainConfig { stage, out } => {
            let stage: TrainingStage = stage.parse().map_err(Failure::Usage)?;
            datagen::export_training_config(stage, &out)?;
            Ok(())
        }
        Command::Eval {
            common,
            bench,
            model,
            official,
        } => eval(&common, &bench, &model, official),
        Command::Report { common, runs } => {
            let out = need(&common.out, "--out")?;
            let runs = bench::load_runs(&runs)?;
            for p in write_report(&runs, out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Validate { common, kind, input } => validate(&common, &kind, input.as_deref()),
    }
}

fn clean(c: &Common) -> Result<(), Failure> {
    let config = CorpusConfig::load(need(&c.config, "--config")?)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let out = need(&c.out, "--out")?;
    let built = build_corpus(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_corpus(&out.join("corpus.jsonl"), &built.docs).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&out.join("sizes.tsv"), &built.sizes.to_tsv())?;
    write_file(&out.join("sizes.md"), &built.sizes.to_markdown())?;
    let mut report = serde_json::to_string_pretty(&built.report).expect("reports serialize");
    report.push('\n');
    write_file(&out.join("clean_report.json"), &report)?;
    print!("{}", built.sizes.to_tsv());
    Ok(())
}

fn load_items(path: &Path) -> Result<Vec<TaskItem>, Failure> {
    let loaded = if path.is_dir() {
        load_bench_dir(path)?
    } else {
        vec![(path.display().to_string(), load_bench(path)?)]
    };
    let mut items = Vec::new();
    let mut bad = Vec::new();
    for (name, b) in loaded {
        bad.extend(b.malformed.iter().map(|m| format!("{name}: {m}")));
        items.extend(b.items);
    }
    if !bad.is_empty() {
        return Err(Failure::Validation(format!("malformed benchmark items:\n{}", bad.join("\n"))));
    }
    Ok(items)
}

fn eval(c: &Common, bench_path: &Path, models: &[String], official: bool) -> Result<(), Failure> {
    let mut config = match &c.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = c.seed {
        config.seed = s;
    }
    for spec in models {
        config.models.push(ModelConfig::parse_mock(spec).map_err(Failure::Usage)?);
    }
    config.validate()?;
    let out = need(&c.out, "--out")?;
    let items = load_items(bench_path)?;
    if official {
        let (rows, ok) = check_official_counts(&items);
        for r in &rows {
            println!("{}\t{}\t{}", r.task, r.found, r.expected);
        }
        if !ok {
            log::warn!("item counts differ from the official split");
        }
    }
    let outcomes = bench::run_bench(&config, &items, out)?;
    for o in &outcomes {
        for (task, s) in &o.run.tasks {
            let h = s.headline.map_or("-".to_owned(), |h| format!("{:.2}", h * 100.0));
            println!("{}\t{}\t{}", o.run.model, task, h);
        }
    }
    let runs: Vec<_> = outcomes.into_iter().map(|o| o.run).collect();
    write_report(&runs, &out.join("report"))?;
    Ok(())
}

fn validate(c: &Common, kind: &str, input: Option<&Path>) -> Result<(), Failure> {
    if let Some(p) = &c.config {
        match kind {
            "datagen" => {
                DatagenConfig::load(p)?;
            }
            "corpus" => {
                CorpusConfig::load(p).map_err(|e| Failure::Validation(e.to_string()))?;
            }
            _ => {
                BenchConfig::load(p)?;
            }
        }
        if input.is_none() {
            println!("{}: ok", p.display());
            return Ok(());
        }
    }
    let path = input.ok_or_else(|| Failure::Usage("nothing to validate".into()))?;
    let bytes = std::fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let bad: Vec<MalformedLine> = match kind {
        "bench" => bench::parse_bench(&bytes).malformed,
        "records" => parse_records(&bytes).malformed,
        "pos" | "ner" => String::from_utf8_lossy(&bytes)
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .filter_map(|(n, l)| {
                let err = if kind == "pos" {
                    parse_slash_tags(l, true).err().map(|e| e.to_string())
                } else {
                    let out = l.split_once('\t').map_or(l, |(_, o)| o);
                    parse_entity_output(out).err().map(|e| e.to_string())
                };
                err.map(|reason| MalformedLine { line: n + 1, reason })
            })
            .collect(),
        other => return Err(Failure::Usage(format!("unknown kind {other:?} (bench, records, pos, ner)"))),
    };
    if bad.is_empty() {
        println!("{}: ok", path.display());
        return Ok(());
    }
    for m in &bad {
        println!("{}: {m}", path.display());
    }
    Err(Failure::Validation(format!("{} bad line(s)", bad.len())))
}
