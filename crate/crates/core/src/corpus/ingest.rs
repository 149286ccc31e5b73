use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{CorpusError, RawDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    /// One document per file.
    PlainText,
    /// One JSON object with a `text` string per line.
    LineJson,
    /// Header row with a `text` column; one document per row.
    Tsv,
}

impl FromStr for SourceFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        match s {
            "plain-text" | "text" | "txt" => Ok(SourceFormat::PlainText),
            "line-json" | "jsonl" => Ok(SourceFormat::LineJson),
            "tsv" => Ok(SourceFormat::Tsv),
            other => Err(CorpusError::UnknownFormat(other.to_owned())),
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::PlainText => "plain-text",
            SourceFormat::LineJson => "line-json",
            SourceFormat::Tsv => "tsv",
        })
    }
}

/// A file or line that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub docs: Vec<RawDocument>,
    pub quarantined: Vec<Quarantined>,
}

/// Reads every regular file under `dir` (hidden entries skipped) in path
/// order. Files are parsed in parallel; output order does not depend on
/// scheduling.
pub fn ingest(dir: &Path, format: SourceFormat, source_id: &str) -> Result<Ingested, CorpusError> {
    if source_id.is_empty() {
        return Err(CorpusError::Invalid("empty source id".into()));
    }
    let meta = fs::metadata(dir).map_err(|e| CorpusError::io(dir, e))?;
    if !meta.is_dir() {
        return Err(CorpusError::Invalid(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    let mut quarantined = Vec::new();
    let walker = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => quarantined.push(Quarantined {
                path: e
                    .path()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                reason: e.to_string(),
            }),
        }
    }

    let per_file: Vec<Ingested> = files
        .par_iter()
        .map(|path| {
            let rel = path
                .strip_prefix(dir)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            match fs::read(path) {
                Ok(bytes) => ingest_file(&bytes, &rel, format, source_id),
                Err(e) => Ingested {
                    docs: vec![],
                    quarantined: vec![Quarantined {
                        path: rel,
                        reason: e.to_string(),
                    }],
                },
            }
        })
        .collect();

    let mut out = Ingested {
        docs: Vec::new(),
        quarantined,
    };
    for got in per_file {
        out.docs.extend(got.docs);
        out.quarantined.extend(got.quarantined);
    }
    Ok(out)
}

/// Parses one file's bytes. A file that is not valid UTF-8 is quarantined
/// whole; bad lines in line-oriented formats are quarantined one by one.
pub fn ingest_file(bytes: &[u8], rel: &str, format: SourceFormat, source_id: &str) -> Ingested {
    let mut out = Ingested::default();
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t.strip_prefix('\u{FEFF}').unwrap_or(t),
        Err(e) => {
            out.quarantined.push(Quarantined {
                path: rel.to_owned(),
                reason: format!("invalid UTF-8: {e}"),
            });
            return out;
        }
    };
    let doc = |path: String, text: String, meta: BTreeMap<String, String>| RawDocument {
        source_id: source_id.to_owned(),
        path,
        text,
        meta,
    };
    match format {
        SourceFormat::PlainText => {
            if !text.trim().is_empty() {
                out.docs.push(doc(rel.to_owned(), text.to_owned(), BTreeMap::new()));
            }
        }
        SourceFormat::LineJson => {
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let at = format!("{rel}:{}", i + 1);
                match parse_json_line(line) {
                    Ok((t, meta)) => out.docs.push(doc(at, t, meta)),
                    Err(reason) => out.quarantined.push(Quarantined { path: at, reason }),
                }
            }
        }
        SourceFormat::Tsv => {
            let mut lines = text.lines().enumerate();
            let Some((_, header)) = lines.next() else {
                return out;
            };
            let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
            let Some(text_col) = columns.iter().position(|c| *c == "text") else {
                out.quarantined.push(Quarantined {
                    path: rel.to_owned(),
                    reason: "header has no `text` column".into(),
                });
                return out;
            };
            for (i, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let at = format!("{rel}:{}", i + 1);
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != columns.len() {
                    out.quarantined.push(Quarantined {
                        path: at,
                        reason: format!("expected {} fields, got {}", columns.len(), fields.len()),
                    });
                    continue;
                }
                let meta = columns
                    .iter()
                    .zip(&fields)
                    .enumerate()
                    .filter(|(j, _)| *j != text_col)
                    .map(|(_, (k, v))| (k.to_string(), v.to_string()))
                    .collect();
                out.docs.push(doc(at, fields[text_col].to_owned(), meta));
            }
        }
    }
    out
}

fn parse_json_line(line: &str) -> Result<(String, BTreeMap<String, String>), String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let serde_json::Value::Object(map) = value else {
        return Err("not a JSON object".into());
    };
    let mut text = None;
    let mut meta = BTreeMap::new();
    for (k, v) in map {
        match (k.as_str(), v) {
            ("text", serde_json::Value::String(s)) => text = Some(s),
            ("text", _) => return Err("`text` is not a string".into()),
            (_, serde_json::Value::String(s)) => {
                meta.insert(k, s);
            }
            (_, v @ (serde_json::Value::Number(_) | serde_json::Value::Bool(_))) => {
                meta.insert(k, v.to_string());
            }
            _ => {}
        }
    }
    text.map(|t| (t, meta)).ok_or_else(|| "missing `text`".into())
}
