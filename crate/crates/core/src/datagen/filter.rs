//! Rule-based screening of instruction candidates.
//!
//! Rules run in a fixed order and a rejected candidate records the first
//! rule it failed.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::candidates::{InstructionCandidate, RejectReason, Status};
use super::pairs::{validate_output, IOPair};
use super::DatagenError;
use crate::formats::{EntityCategory, EntityKeyAliases, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    /// Bounds on the instruction length in characters.
    pub min_chars: usize,
    pub max_chars: usize,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            min_chars: 10,
            max_chars: 500,
        }
    }
}

const FORMAT_MARKERS: &[&str] = &["format", "json", "格式", "{", "["];

/// Whether an instruction tells the model what shape its answer must take.
///
/// NER instructions must name all four categories, or name at least one and
/// ask for a structured format. POS instructions must mention tags, and
/// punctuation instructions punctuation. Free-text tasks have no schema.
pub fn mentions_schema(task: Task, text: &str, aliases: &EntityKeyAliases) -> bool {
    let lower = text.to_lowercase();
    let any = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    match task {
        Task::Ner => {
            let named = EntityCategory::ALL
                .iter()
                .filter(|c| aliases.mentions(text, **c))
                .count();
            named == EntityCategory::ALL.len() || (named > 0 && any(FORMAT_MARKERS))
        }
        Task::Pos => any(&["/", "part of speech", "part-of-speech", "pos tag", "词性"]),
        Task::Punctuation => any(&["punctuat", "标点", "句读", "断句"]),
        _ => true,
    }
}

/// Applies the rules to pending candidates. Candidates already decided
/// keep their status. Returns (accepted, rejected), each in input order.
///
/// For structured tasks the instruction is paired with a sample input of
/// the same task; the output the instruction is expected to produce for it
/// (the sample's reference output) must parse under the task format and
/// agree with the sample input.
pub fn filter_candidates(
    candidates: Vec<InstructionCandidate>,
    samples: &[IOPair],
    rules: &FilterRules,
    aliases: &EntityKeyAliases,
) -> (Vec<InstructionCandidate>, Vec<InstructionCandidate>) {
    let mut seen = HashSet::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for mut c in candidates {
        if c.status == Status::Pending {
            c.status = match check(&c, samples, rules, aliases, &mut seen) {
                Some(reason) => Status::Rejected(reason),
                None => Status::Accepted,
            };
        }
        match c.status {
            Status::Accepted => accepted.push(c),
            _ => rejected.push(c),
        }
    }
    (accepted, rejected)
}

fn check(
    c: &InstructionCandidate,
    samples: &[IOPair],
    rules: &FilterRules,
    aliases: &EntityKeyAliases,
    seen: &mut HashSet<(Task, String)>,
) -> Option<RejectReason> {
    let text = c.text.trim();
    let len = text.chars().count();
    if len == 0 {
        return Some(RejectReason::Empty);
    }
    if len < rules.min_chars {
        return Some(RejectReason::TooShort);
    }
    if len > rules.max_chars {
        return Some(RejectReason::TooLong);
    }
    if !seen.insert((c.task, text.to_owned())) {
        return Some(RejectReason::Duplicate);
    }
    if !mentions_schema(c.task, text, aliases) {
        return Some(RejectReason::NoStructuredSchema);
    }
    let structured = matches!(c.task, Task::Punctuation | Task::Pos | Task::Ner);
    if structured {
        let same_task: Vec<&IOPair> = samples.iter().filter(|p| p.task == c.task).collect();
        if !same_task.is_empty() {
            let sample = same_task[stable_index(&c.id, same_task.len())];
            if validate_output(c.task, &sample.input, &sample.output, aliases).is_err() {
                return Some(RejectReason::SampleOutputUnparseable);
            }
        }
    }
    None
}

fn stable_index(id: &str, n: usize) -> usize {
    id.bytes()
        .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)) as usize
        % n
}

/// Instruction texts to reject by hand, one per line.
pub fn load_manual_rejects(path: &Path) -> Result<HashSet<String>, DatagenError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatagenError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

/// Marks candidates whose text is listed as manually rejected.
pub fn apply_manual_rejects(candidates: &mut [InstructionCandidate], rejects: &HashSet<String>) {
    for c in candidates {
        if rejects.contains(c.text.trim()) {
            c.status = Status::Rejected(RejectReason::Manual);
        }
    }
}
