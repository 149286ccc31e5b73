//! Instruction-data construction: pairs from corpora, seed instructions,
//! model-driven expansion and reverse reasoning, filtering, pilot testing,
//! answer generation and integration into the final dataset.

pub mod candidates;
pub mod filter;
pub mod generate;
pub mod mock;
pub mod pairs;
pub mod pilot;
pub mod training;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{Extractor, ScoreOptions, Scorer};
use crate::client::{ChatClient, ChatClientConfig, HttpChatClient, RetryPolicy};
use crate::formats::{read_records, write_jsonl, EntityKeyAliases, InstructionRecord, MalformedLine, Task};
use crate::prompt::TemplateSet;
use crate::textnorm::PunctInventory;

pub use candidates::{
    expand_instructions, parse_numbered_list, reverse_reason, seed_candidates, ClientOptions,
    Generated, InstructionCandidate, Origin, RejectReason, Status,
};
pub use filter::{filter_candidates, mentions_schema, FilterRules};
pub use generate::{assign_instructions, generate_answers, integrate, Answers, DatasetStats, Integrated, Reject};
pub use mock::mock_generator;
pub use pairs::{build_pairs, validate_output, IOPair, PairsBuilt};
pub use pilot::{pilot_test, sample_pairs, PilotScore, DEFAULT_PILOT_SAMPLE};
pub use training::{export_training_config, render_training_config, training_config, TrainingStage};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Precondition(String),
    #[error("template: {0}")]
    Template(String),
    #[error("model call for {context} failed: {message}")]
    Client { context: String, message: String },
    #[error("record {id} failed validation: {reason}")]
    InvalidRecord { id: String, reason: String },
}

impl DatagenError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DatagenError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorKind {
    Mock,
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    pub task: Task,
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub seed: u64,
    pub parallelism: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
    pub templates_dir: Option<PathBuf>,
    pub entity_aliases: Option<PathBuf>,
    pub sources: Vec<SourceConfig>,
    /// Existing instruction-record files merged at integration.
    pub supplementary: Vec<PathBuf>,
    /// Pairs per task handed to reverse reasoning.
    pub reverse_per_task: usize,
    pub filter: FilterRules,
    /// Instruction texts rejected by hand, one per line.
    pub manual_rejects: Option<PathBuf>,
    pub pilot_sample: usize,
    /// Best instructions per task kept after the pilot.
    pub keep_per_task: usize,
    pub scoring: ScoreOptions,
    pub expander: GeneratorKind,
    pub generator: GeneratorKind,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        let c = ChatClientConfig::default();
        Self {
            seed: 0,
            parallelism: c.parallelism,
            temperature: c.temperature,
            max_tokens: c.max_tokens,
            retry: c.retry,
            templates_dir: None,
            entity_aliases: None,
            sources: Vec::new(),
            supplementary: Vec::new(),
            reverse_per_task: 2,
            filter: FilterRules::default(),
            manual_rejects: None,
            pilot_sample: DEFAULT_PILOT_SAMPLE,
            keep_per_task: 4,
            scoring: ScoreOptions::default(),
            expander: GeneratorKind::Mock,
            generator: GeneratorKind::Mock,
        }
    }
}

impl DatagenConfig {
    pub fn from_toml(text: &str) -> Result<Self, DatagenError> {
        let c: Self = toml::from_str(text).map_err(|e| DatagenError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, DatagenError> {
        let text = fs::read_to_string(path).map_err(|e| DatagenError::io(path, e))?;
        let mut c = Self::from_toml(&text)
            .map_err(|e| DatagenError::Config(format!("{}: {e}", path.display())))?;
        c.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        self.supplementary.iter_mut().for_each(fix);
        for p in [&mut self.templates_dir, &mut self.entity_aliases, &mut self.manual_rejects]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        ChatClientConfig {
            parallelism: self.parallelism,
            retry: self.retry.clone(),
            ..Default::default()
        }
        .validate()
        .map_err(|e| DatagenError::Config(e.to_string()))?;
        if self.filter.min_chars > self.filter.max_chars {
            return Err(DatagenError::Config("filter.min_chars exceeds filter.max_chars".into()));
        }
        if self.keep_per_task == 0 {
            return Err(DatagenError::Config("keep_per_task must be at least 1".into()));
        }
        Ok(())
    }

    pub fn client_options(&self) -> ClientOptions {
        ClientOptions {
            parallelism: self.parallelism,
            retry: self.retry.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    fn client(
        &self,
        kind: &GeneratorKind,
        role: &str,
        pairs: &[IOPair],
        templates: &TemplateSet,
    ) -> Result<Box<dyn ChatClient>, DatagenError> {
        Ok(match kind {
            GeneratorKind::Mock => Box::new(mock_generator(&format!("mock-{role}"), pairs, templates, self.seed)),
            GeneratorKind::Http {
                endpoint,
                model,
                api_key_env,
                timeout_secs,
            } => Box::new(
                HttpChatClient::new(ChatClientConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    api_key_env: api_key_env.clone(),
                    temperature: self.temperature,
                    max_tokens: self.max_tokens,
                    parallelism: self.parallelism,
                    timeout_secs: *timeout_secs,
                    retry: self.retry.clone(),
                })
                .map_err(|e| DatagenError::Config(format!("{role}: {e}")))?,
            ),
        })
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Pairs,
    Seed,
    Expand,
    Reverse,
    Filter,
    Pilot,
    Generate,
    Integrate,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 8] = [
        PipelineStage::Pairs,
        PipelineStage::Seed,
        PipelineStage::Expand,
        PipelineStage::Reverse,
        PipelineStage::Filter,
        PipelineStage::Pilot,
        PipelineStage::Generate,
        PipelineStage::Integrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineStage::Pairs => "pairs",
            PipelineStage::Seed => "seed",
            PipelineStage::Expand => "expand",
            PipelineStage::Reverse => "reverse",
            PipelineStage::Filter => "filter",
            PipelineStage::Pilot => "pilot",
            PipelineStage::Generate => "generate",
            PipelineStage::Integrate => "integrate",
        }
    }
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
                format!("unknown stage {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Serialize)]
struct PairReject<'a> {
    source: &'a str,
    #[serde(flatten)]
    line: &'a MalformedLine,
}

/// What a pipeline run produced; also written as `metadata.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub stages: Vec<PipelineStage>,
    pub counts: BTreeMap<String, usize>,
}

fn write<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatagenError> {
    write_jsonl(items, path).map_err(|e| DatagenError::Config(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<(), DatagenError> {
    fs::write(path, text).map_err(|e| DatagenError::io(path, e))
}

/// Runs the stages up to and including `until`, writing each stage's
/// output into `out_dir`. With mock generators and a fixed seed every
/// output file is reproducible byte for byte.
pub fn run_pipeline(
    config: &DatagenConfig,
    out_dir: &Path,
    until: PipelineStage,
) -> Result<PipelineReport, DatagenError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| DatagenError::io(out_dir, e))?;
    let mut report = PipelineReport {
        seed: config.seed,
        ..Default::default()
    };
    let done = |report: &mut PipelineReport, stage: PipelineStage, counts: &[(&str, usize)]| {
        report.stages.push(stage);
        for (k, v) in counts {
            report.counts.insert(format!("{stage}.{k}"), *v);
        }
        log::info!("{stage}: {counts:?}");
        stage >= until
    };
    let finish = |report: &PipelineReport| -> Result<PipelineReport, DatagenError> {
        let mut json = serde_json::to_string_pretty(report).expect("reports serialize");
        json.push('\n');
        write_text(&out_dir.join("metadata.json"), &json)?;
        Ok(report.clone())
    };

    let aliases = match &config.entity_aliases {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| DatagenError::io(p, e))?;
            EntityKeyAliases::parse(&text).map_err(|e| DatagenError::Config(format!("{}: {e}", p.display())))?
        }
        None => EntityKeyAliases::default(),
    };
    let templates = match &config.templates_dir {
        Some(d) => TemplateSet::with_overrides(d).map_err(|e| DatagenError::Template(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let extractor = Extractor::new(
        crate::bench::extract::DEFAULT_PREAMBLES,
        aliases.clone(),
        PunctInventory::builtin().clone(),
    )
    .map_err(|e| DatagenError::Config(e.to_string()))?;
    let opts = config.client_options();

    // pairs
    if config.sources.is_empty() {
        return Err(DatagenError::Precondition("no sources configured".into()));
    }
    let mut pairs = Vec::new();
    let mut pair_rejects = Vec::new();
    for s in &config.sources {
        let text = fs::read_to_string(&s.path).map_err(|e| DatagenError::io(&s.path, e))?;
        let name = s.name.clone().unwrap_or_else(|| {
            s.path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
        });
        let built = build_pairs(&text, s.task, &name, &aliases);
        pairs.extend(built.pairs);
        pair_rejects.extend(built.rejected.into_iter().map(|l| (name.clone(), l)));
    }
    write(&pairs, &out_dir.join("pairs.jsonl"))?;
    let rejects: Vec<PairReject> = pair_rejects
        .iter()
        .map(|(source, line)| PairReject { source, line })
        .collect();
    write(&rejects, &out_dir.join("pair_rejects.jsonl"))?;
    if done(&mut report, PipelineStage::Pairs, &[("pairs", pairs.len()), ("rejected", rejects.len())]) {
        return finish(&report);
    }

    // seed
    let tasks: Vec<Task> = Task::BENCH
        .into_iter()
        .chain([Task::Other])
        .filter(|t| pairs.iter().any(|p| p.task == *t))
        .collect();
    let seeds = seed_candidates(&templates, &tasks);
    let mut candidates = seeds.clone();
    write(&candidates, &out_dir.join("candidates.jsonl"))?;
    if done(&mut report, PipelineStage::Seed, &[("seeds", seeds.len())]) {
        return finish(&report);
    }

    // expand
    let expander = config.client(&config.expander, "expander", &pairs, &templates)?;
    let expanded = expand_instructions(&seeds, expander.as_ref(), &templates, &opts)?;
    candidates.extend(expanded.candidates.iter().cloned());
    write(&candidates, &out_dir.join("candidates.jsonl"))?;
    if done(
        &mut report,
        PipelineStage::Expand,
        &[("candidates", expanded.candidates.len()), ("unparseable", expanded.unparseable.len())],
    ) {
        return finish(&report);
    }

    // reverse
    let reverse_pairs: Vec<IOPair> = tasks
        .iter()
        .flat_map(|t| sample_pairs(&pairs, *t, config.reverse_per_task, config.seed, "reverse"))
        .cloned()
        .collect();
    let reversed = if reverse_pairs.is_empty() {
        Generated::default()
    } else {
        reverse_reason(&reverse_pairs, expander.as_ref(), &templates, &opts)?
    };
    candidates.extend(reversed.candidates.iter().cloned());
    write(&candidates, &out_dir.join("candidates.jsonl"))?;
    if done(
        &mut report,
        PipelineStage::Reverse,
        &[("candidates", reversed.candidates.len()), ("unparseable", reversed.unparseable.len())],
    ) {
        return finish(&report);
    }

    // filter
    if let Some(p) = &config.manual_rejects {
        filter::apply_manual_rejects(&mut candidates, &filter::load_manual_rejects(p)?);
    }
    let (accepted, rejected) = filter_candidates(candidates, &pairs, &config.filter, &aliases);
    write(&accepted, &out_dir.join("accepted.jsonl"))?;
    write(&rejected, &out_dir.join("filtered.jsonl"))?;
    if done(
        &mut report,
        PipelineStage::Filter,
        &[("accepted", accepted.len()), ("rejected", rejected.len())],
    ) {
        return finish(&report);
    }

    // pilot
    let generator = config.client(&config.generator, "generator", &pairs, &templates)?;
    let scorer = Scorer {
        extractor: &extractor,
        embedder: None,
        options: config.scoring,
    };
    let ranked = pilot_test(
        &accepted,
        &pairs,
        generator.as_ref(),
        &scorer,
        &templates,
        &opts,
        config.pilot_sample,
        config.seed,
    );
    write(&ranked, &out_dir.join("pilot.jsonl"))?;
    let mut kept_ids = std::collections::HashSet::new();
    for t in &tasks {
        kept_ids.extend(ranked.iter().filter(|s| s.task == *t).take(config.keep_per_task).map(|s| s.id.clone()));
    }
    let kept: Vec<InstructionCandidate> = accepted.into_iter().filter(|c| kept_ids.contains(&c.id)).collect();
    if done(&mut report, PipelineStage::Pilot, &[("scored", ranked.len()), ("kept", kept.len())]) {
        return finish(&report);
    }

    // generate
    let jobs = assign_instructions(&kept, &pairs);
    let answers = generate_answers(&jobs, generator.as_ref(), &extractor, &templates, &opts)?;
    write(&answers.records, &out_dir.join("generated.jsonl"))?;
    write(&answers.rejects, &out_dir.join("rejects.jsonl"))?;
    if done(
        &mut report,
        PipelineStage::Generate,
        &[("records", answers.records.len()), ("rejects", answers.rejects.len())],
    ) {
        return finish(&report);
    }

    // integrate
    let mut sets: Vec<Vec<InstructionRecord>> = vec![answers.records];
    for p in &config.supplementary {
        let read = read_records(p).map_err(|e| DatagenError::Config(e.to_string()))?;
        if let Some(m) = read.malformed.first() {
            return Err(DatagenError::InvalidRecord {
                id: format!("{}:{}", p.display(), m.line),
                reason: m.reason.clone(),
            });
        }
        sets.push(read.records);
    }
    let refs: Vec<&[InstructionRecord]> = sets.iter().map(Vec::as_slice).collect();
    let integrated = integrate(&refs, &extractor)?;
    write(&integrated.records, &out_dir.join("dataset.jsonl"))?;
    write_text(&out_dir.join("stats.tsv"), &integrated.stats.to_tsv())?;
    done(
        &mut report,
        PipelineStage::Integrate,
        &[("records", integrated.records.len()), ("duplicates", integrated.duplicates)],
    );
    finish(&report)
}
