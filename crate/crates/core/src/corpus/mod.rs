//! Raw corpus ingestion, cleaning, exact deduplication and per-source size
//! accounting.

mod clean;
mod ingest;
mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean, dedup, Cleaner, CleanCounts, DedupCounts};
pub use ingest::{ingest, ingest_file, Ingested, Quarantined, SourceFormat};
pub use stats::{format_size, stats, SizeRow, SizeTable};

use crate::textnorm::NormPolicy;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad boilerplate pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("unknown source format {0:?} (expected plain-text, line-json or tsv)")]
    UnknownFormat(String),
    #[error("{0}")]
    Invalid(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub source_id: String,
    /// File path relative to the ingested directory, with `:line` for
    /// line-oriented formats.
    pub path: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

/// Per-rule accounting for one cleaning run.
///
/// `docs_in - docs_out == removed.duplicate_docs + removed.empty_docs`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub docs_in: usize,
    pub docs_out: usize,
    pub bytes_in: usize,
    pub bytes_out: usize,
    pub removed: Removed,
    pub quarantined: Vec<Quarantined>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removed {
    pub control_chars: usize,
    pub invalid_chars: usize,
    pub boilerplate_lines: usize,
    pub duplicate_docs: usize,
    pub duplicate_paragraphs: usize,
    /// Documents with no text left after cleaning.
    pub empty_docs: usize,
}

/// One input directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub dir: PathBuf,
    pub format: SourceFormat,
    /// Defaults to the directory name.
    #[serde(default)]
    pub source_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub policy: NormPolicy,
    /// Regexes; a line matching any of them is dropped.
    #[serde(default)]
    pub boilerplate: Vec<String>,
    #[serde(default)]
    pub paragraph_dedup: bool,
}

impl CorpusConfig {
    /// Reads a TOML config; relative source directories are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CorpusError::Invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut config.sources {
            if s.dir.is_relative() {
                s.dir = base.join(&s.dir);
            }
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOutput {
    pub docs: Vec<RawDocument>,
    pub report: CleanReport,
    pub sizes: SizeTable,
}

/// Ingest, clean and deduplicate every source, in source order.
pub fn build_corpus(config: &CorpusConfig) -> Result<CorpusOutput, CorpusError> {
    let cleaner = Cleaner::new(config.policy.clone(), &config.boilerplate)?;
    let mut report = CleanReport::default();
    let mut raw = Vec::new();
    for spec in &config.sources {
        let id = match &spec.source_id {
            Some(id) => id.clone(),
            None => spec
                .dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .ok_or_else(|| {
                    CorpusError::Invalid(format!("cannot name source {}", spec.dir.display()))
                })?,
        };
        let got = ingest(&spec.dir, spec.format, &id)?;
        raw.extend(got.docs);
        report.quarantined.extend(got.quarantined);
    }
    report.docs_in = raw.len();
    report.bytes_in = raw.iter().map(|d| d.text.len()).sum();

    let cleaned: Vec<(RawDocument, CleanCounts)> =
        raw.into_par_iter().map(|d| clean(d, &cleaner)).collect();
    let mut docs = Vec::with_capacity(cleaned.len());
    for (doc, counts) in cleaned {
        report.removed.control_chars += counts.control_chars;
        report.removed.invalid_chars += counts.invalid_chars;
        report.removed.boilerplate_lines += counts.boilerplate_lines;
        if doc.text.is_empty() {
            report.removed.empty_docs += 1;
        } else {
            docs.push(doc);
        }
    }

    let (docs, dd) = dedup(docs, config.paragraph_dedup);
    report.removed.duplicate_docs += dd.duplicate_docs;
    report.removed.duplicate_paragraphs += dd.duplicate_paragraphs;
    report.removed.empty_docs += dd.emptied_docs;
    report.docs_out = docs.len();
    report.bytes_out = docs.iter().map(|d| d.text.len()).sum();
    let sizes = stats(&docs);
    Ok(CorpusOutput {
        docs,
        report,
        sizes,
    })
}

#[derive(Serialize)]
struct CorpusLine<'a> {
    source: &'a str,
    text: &'a str,
}

/// Writes `{source, text}` lines.
pub fn write_corpus(path: &Path, docs: &[RawDocument]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        let line = serde_json::to_string(&CorpusLine {
            source: &d.source_id,
            text: &d.text,
        })
        .expect("string fields always serialize");
        writeln!(w, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}
