//! Instruction candidates: manual seeds, expansions of seeds, and
//! instructions reverse-engineered from input-output pairs.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::pairs::IOPair;
use super::DatagenError;
use crate::client::{complete, fan_out, ChatClient, ChatClientConfig, RetryPolicy};
use crate::formats::Task;
use crate::prompt::TemplateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Manual,
    Expanded,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Empty,
    TooShort,
    TooLong,
    Duplicate,
    NoStructuredSchema,
    SampleOutputUnparseable,
    Manual,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Empty => "empty",
            RejectReason::TooShort => "too-short",
            RejectReason::TooLong => "too-long",
            RejectReason::Duplicate => "duplicate",
            RejectReason::NoStructuredSchema => "no-structured-schema",
            RejectReason::SampleOutputUnparseable => "sample-output-unparseable",
            RejectReason::Manual => "manual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Pending,
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionCandidate {
    pub id: String,
    pub text: String,
    pub task: Task,
    pub origin: Origin,
    /// Seed candidate id for expansions, pair id for reverse reasoning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(flatten)]
    pub status: Status,
}

impl InstructionCandidate {
    pub fn manual(id: impl Into<String>, task: Task, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            task,
            origin: Origin::Manual,
            parent: None,
            status: Status::Pending,
        }
    }
}

/// The built-in seed template of every task that has one.
pub fn seed_candidates(templates: &TemplateSet, tasks: &[Task]) -> Vec<InstructionCandidate> {
    tasks
        .iter()
        .filter_map(|&t| {
            templates
                .seed(t)
                .map(|text| InstructionCandidate::manual(format!("seed-{}", t.name()), t, text))
        })
        .collect()
}

static ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(\d{1,3})\s*[.、．)）]\s*(.*)$").expect("valid pattern"));

/// Items of a numbered list (`1.`, `1、`, `1)`). Unnumbered lines after an
/// item continue it; text before the first item and lines made only of
/// dots are dropped.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.chars().all(|c| matches!(c, '.' | '…' | '。')) {
            continue;
        }
        if let Some(c) = ITEM.captures(line) {
            items.push(c[2].trim().to_owned());
        } else if let Some(last) = items.last_mut() {
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(trimmed);
        }
    }
    items
        .into_iter()
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Settings shared by every stage that talks to a model.
#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ClientOptions {
    fn default() -> Self {
        let c = ChatClientConfig::default();
        Self {
            parallelism: c.parallelism,
            retry: c.retry,
            temperature: c.temperature,
            max_tokens: c.max_tokens,
        }
    }
}

impl ClientOptions {
    pub(crate) fn ask(&self, client: &dyn ChatClient, prompt: &str) -> Result<String, crate::client::ClientError> {
        let req = ChatClientConfig {
            model: client.model().to_owned(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            ..Default::default()
        }
        .request(prompt);
        complete(client, &req, &self.retry).map(|c| c.content)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Generated {
    pub candidates: Vec<InstructionCandidate>,
    /// Parents whose responses held no numbered list.
    pub unparseable: Vec<String>,
}

fn collect(
    jobs: Vec<(String, Task, Origin, Result<String, DatagenError>)>,
    tag: &str,
) -> Result<Generated, DatagenError> {
    let mut out = Generated::default();
    for (parent, task, origin, response) in jobs {
        let items = parse_numbered_list(&response?);
        if items.is_empty() {
            log::warn!("no instructions parsed from the response for {parent}");
            out.unparseable.push(parent);
            continue;
        }
        for (k, text) in items.into_iter().enumerate() {
            out.candidates.push(InstructionCandidate {
                id: format!("{parent}/{tag}{}", k + 1),
                text,
                task,
                origin,
                parent: Some(parent.clone()),
                status: Status::Pending,
            });
        }
    }
    Ok(out)
}

/// Asks the model for variations of each seed instruction.
pub fn expand_instructions(
    seeds: &[InstructionCandidate],
    client: &dyn ChatClient,
    templates: &TemplateSet,
    opts: &ClientOptions,
) -> Result<Generated, DatagenError> {
    if seeds.is_empty() {
        return Err(DatagenError::Precondition("no seed instructions".into()));
    }
    let jobs = fan_out(seeds, opts.parallelism, |seed| {
        let response = templates
            .expand_prompt(seed.task, &seed.text)
            .map_err(|e| DatagenError::Template(e.to_string()))
            .and_then(|p| {
                opts.ask(client, &p).map_err(|e| DatagenError::Client {
                    context: seed.id.clone(),
                    message: e.to_string(),
                })
            });
        (seed.id.clone(), seed.task, Origin::Expanded, response)
    });
    collect(jobs, "e")
}

/// Asks the model which instructions would turn each pair's input into
/// its output.
pub fn reverse_reason(
    pairs: &[IOPair],
    client: &dyn ChatClient,
    templates: &TemplateSet,
    opts: &ClientOptions,
) -> Result<Generated, DatagenError> {
    if pairs.is_empty() {
        return Err(DatagenError::Precondition("no input-output pairs".into()));
    }
    let jobs = fan_out(pairs, opts.parallelism, |pair| {
        let response = templates
            .reverse_prompt(pair.task, &pair.input, &pair.output)
            .map_err(|e| DatagenError::Template(e.to_string()))
            .and_then(|p| {
                opts.ask(client, &p).map_err(|e| DatagenError::Client {
                    context: pair.id.clone(),
                    message: e.to_string(),
                })
            });
        (pair.id.clone(), pair.task, Origin::Reverse, response)
    });
    collect(jobs, "r")
}
