//! Line-delimited instruction records.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Punctuation,
    Pos,
    Ner,
    Translation,
    WordExplanation,
    ReverseDictionary,
    Other,
}

impl Task {
    /// The six benchmark tasks, in report column order.
    pub const BENCH: [Task; 6] = [
        Task::Punctuation,
        Task::Pos,
        Task::Ner,
        Task::Translation,
        Task::WordExplanation,
        Task::ReverseDictionary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Punctuation => "punctuation",
            Task::Pos => "pos",
            Task::Ner => "ner",
            Task::Translation => "translation",
            Task::WordExplanation => "word_explanation",
            Task::ReverseDictionary => "reverse_dictionary",
            Task::Other => "other",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Task::Punctuation => "Punctuation",
            Task::Pos => "Part-of-speech tagging",
            Task::Ner => "NER",
            Task::Translation => "Translation",
            Task::WordExplanation => "Word explanation",
            Task::ReverseDictionary => "Reverse dictionary",
            Task::Other => "Other",
        }
    }

    /// Punctuation, POS and NER are scored with P/R/F1.
    pub fn is_understanding(self) -> bool {
        matches!(self, Task::Punctuation | Task::Pos | Task::Ner)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Task::Other]
            .into_iter()
            .chain(Task::BENCH)
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seed,
    Expanded,
    ReverseReasoned,
    Generated,
    Integrated,
}

/// One (instruction, input, output) fine-tuning triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
    pub task: Task,
    pub source: String,
    pub stage: Stage,
}

impl InstructionRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.instruction.trim().is_empty() {
            return Err("empty instruction".into());
        }
        if self.stage == Stage::Integrated && self.output.trim().is_empty() {
            return Err("integrated record with empty output".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for MalformedLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Records plus the lines that failed to parse. Blank lines are skipped and
/// counted in neither list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordsRead {
    pub records: Vec<InstructionRecord>,
    pub malformed: Vec<MalformedLine>,
}

/// Splits arbitrary bytes into JSON lines and decodes each with `decode`.
/// Returns the 1-based line number with each result; blank lines are dropped.
pub fn decode_lines<T>(
    bytes: &[u8],
    mut decode: impl FnMut(&str) -> Result<T, String>,
) -> Vec<(usize, Result<T, String>)> {
    let mut out = Vec::new();
    for (idx, raw) in bytes.split(|b| *b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let result = match std::str::from_utf8(raw) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => decode(line),
            Err(e) => Err(format!("invalid UTF-8: {e}")),
        };
        out.push((idx + 1, result));
    }
    out
}

pub fn parse_records(bytes: &[u8]) -> RecordsRead {
    let mut read = RecordsRead::default();
    for (line, result) in decode_lines(bytes, |line| {
        let rec: InstructionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        rec.check()?;
        Ok(rec)
    }) {
        match result {
            Ok(rec) => read.records.push(rec),
            Err(reason) => read.malformed.push(MalformedLine { line, reason }),
        }
    }
    read
}

pub fn read_records(path: impl AsRef<Path>) -> Result<RecordsRead, FormatError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    Ok(parse_records(&bytes))
}

pub fn write_records(records: &[InstructionRecord], path: impl AsRef<Path>) -> Result<(), FormatError> {
    write_jsonl(records, path)
}

/// Writes one compact JSON object per line.
pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(|e| FormatError::Json(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    file.write_all(&buf).map_err(|e| FormatError::io(path, e))
}
