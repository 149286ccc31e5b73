use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BenchError;
use crate::formats::{
    decode_lines, parse_entity_output, parse_slash_tags, serialize_slash_tags, EntitySet,
    MalformedLine, TaggedSequence, Task,
};
use crate::metrics::bleu_tokens;

/// Reference answer, typed by task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    /// Punctuated text, translation, explanation or word.
    Text(String),
    Tags(TaggedSequence),
    Entities(EntitySet),
}

impl Gold {
    /// The answer as a model would be expected to write it.
    pub fn render(&self) -> String {
        match self {
            Gold::Text(t) => t.clone(),
            Gold::Tags(seq) => serialize_slash_tags(seq).unwrap_or_default(),
            Gold::Entities(set) => set.to_schema_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Gold::Entities(set) => serde_json::to_value(set).expect("entity sets serialize"),
            other => Value::String(other.render()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskItem {
    pub id: String,
    pub task: Task,
    pub instruction: String,
    pub input: String,
    pub gold: Gold,
}

#[derive(Serialize, Deserialize)]
struct ItemLine {
    id: Value,
    task: Task,
    #[serde(default)]
    instruction: String,
    #[serde(default)]
    input: String,
    gold: Value,
}

impl Serialize for TaskItem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ItemLine {
            id: Value::String(self.id.clone()),
            task: self.task,
            instruction: self.instruction.clone(),
            input: self.input.clone(),
            gold: self.gold.to_json(),
        }
        .serialize(s)
    }
}

/// Validates one benchmark line.
pub fn parse_item(line: &str) -> Result<TaskItem, String> {
    let raw: ItemLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = match raw.id {
        Value::String(s) if !s.trim().is_empty() => s,
        Value::Number(n) => n.to_string(),
        _ => return Err("id must be a non-empty string or a number".into()),
    };
    if raw.instruction.trim().is_empty() && raw.input.trim().is_empty() {
        return Err("instruction and input are both empty".into());
    }
    let gold = parse_gold(raw.task, raw.gold)?;
    Ok(TaskItem {
        id,
        task: raw.task,
        instruction: raw.instruction,
        input: raw.input,
        gold,
    })
}

pub fn parse_gold(task: Task, gold: Value) -> Result<Gold, String> {
    match (task, gold) {
        (Task::Ner, Value::Object(map)) => {
            let set: EntitySet =
                serde_json::from_value(Value::Object(map)).map_err(|e| format!("gold: {e}"))?;
            Ok(Gold::Entities(set))
        }
        (Task::Ner, Value::String(s)) => parse_entity_output(&s)
            .map(Gold::Entities)
            .map_err(|e| format!("gold: {e}")),
        (Task::Pos, Value::String(s)) => {
            let seq = parse_slash_tags(&s, true).map_err(|e| format!("gold: {e}"))?;
            if seq.is_empty() {
                return Err("gold: empty tag sequence".into());
            }
            Ok(Gold::Tags(seq))
        }
        (Task::Other, _) => Err("task `other` is not part of the benchmark".into()),
        (_, Value::String(s)) => {
            if bleu_tokens(&s).is_empty() {
                return Err("gold: empty text".into());
            }
            Ok(Gold::Text(s))
        }
        (task, _) => Err(format!("gold for {task} must be a string")),
    }
}

/// A benchmark line that failed validation.
pub type MalformedItem = MalformedLine;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedBench {
    pub items: Vec<TaskItem>,
    pub malformed: Vec<MalformedItem>,
}

impl LoadedBench {
    /// Fails on the first malformed line, if any.
    pub fn into_valid(self) -> Result<Vec<TaskItem>, BenchError> {
        match self.malformed.into_iter().next() {
            Some(m) => Err(BenchError::Malformed(m)),
            None => Ok(self.items),
        }
    }
}

pub fn parse_bench(bytes: &[u8]) -> LoadedBench {
    let mut out = LoadedBench::default();
    for (line, result) in decode_lines(bytes, parse_item) {
        match result {
            Ok(item) => out.items.push(item),
            Err(reason) => out.malformed.push(MalformedLine { line, reason }),
        }
    }
    let mut seen = std::collections::HashSet::new();
    let dups: Vec<String> = out
        .items
        .iter()
        .filter(|i| !seen.insert(i.id.clone()))
        .map(|i| i.id.clone())
        .collect();
    for id in dups {
        out.malformed.push(MalformedLine {
            line: 0,
            reason: format!("duplicate id {id:?}"),
        });
    }
    out
}

pub fn load_bench(path: &Path) -> Result<LoadedBench, BenchError> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    Ok(parse_bench(&bytes))
}

/// Loads every `*.jsonl` file of a directory, in name order. Malformed
/// lines are reported per file.
pub fn load_bench_dir(dir: &Path) -> Result<Vec<(String, LoadedBench)>, BenchError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| BenchError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            load_bench(&p).map(|b| (name, b))
        })
        .collect()
}

/// Published item counts of the official benchmark split.
pub const OFFICIAL_COUNTS: [(Task, usize); 6] = [
    (Task::Punctuation, 7559),
    (Task::Pos, 1247),
    (Task::Ner, 3741),
    (Task::Translation, 5013),
    (Task::WordExplanation, 3931),
    (Task::ReverseDictionary, 4462),
];

pub const OFFICIAL_TOTAL: usize = 25953;

pub fn task_counts<'a>(items: impl IntoIterator<Item = &'a TaskItem>) -> BTreeMap<Task, usize> {
    let mut m = BTreeMap::new();
    for it in items {
        *m.entry(it.task).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountCheck {
    pub task: Task,
    pub found: usize,
    pub expected: usize,
}

/// Compares per-task counts against the official split. Returns the rows
/// and whether every row and the total match.
pub fn check_official_counts<'a>(
    items: impl IntoIterator<Item = &'a TaskItem>,
) -> (Vec<CountCheck>, bool) {
    let counts = task_counts(items);
    let rows: Vec<CountCheck> = OFFICIAL_COUNTS
        .iter()
        .map(|&(task, expected)| CountCheck {
            task,
            found: counts.get(&task).copied().unwrap_or(0),
            expected,
        })
        .collect();
    let total: usize = counts.values().sum();
    let ok = rows.iter().all(|r| r.found == r.expected) && total == OFFICIAL_TOTAL;
    (rows, ok)
}
