use std::collections::HashSet;

use rayon::prelude::*;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::{CorpusError, RawDocument};
use crate::textnorm::{NormPolicy, Normalizer};

/// A normalization policy plus the boilerplate line patterns.
#[derive(Debug, Clone)]
pub struct Cleaner {
    normalizer: Normalizer<'static>,
    boilerplate: Vec<Regex>,
}

impl Cleaner {
    pub fn new(policy: NormPolicy, boilerplate: &[String]) -> Result<Self, CorpusError> {
        let boilerplate = boilerplate
            .iter()
            .map(|p| Regex::new(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            normalizer: Normalizer::new(policy),
            boilerplate,
        })
    }
}

impl Default for Cleaner {
    fn default() -> Self {
        Self {
            normalizer: Normalizer::new(NormPolicy::default()),
            boilerplate: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanCounts {
    pub control_chars: usize,
    pub invalid_chars: usize,
    pub boilerplate_lines: usize,
}

/// Replacement character, private-use code points and noncharacters.
fn is_invalid(c: char) -> bool {
    let cp = c as u32;
    c == '\u{FFFD}'
        || (0xE000..=0xF8FF).contains(&cp)
        || cp >= 0xF0000
        || (0xFDD0..=0xFDEF).contains(&cp)
        || cp & 0xFFFE == 0xFFFE
}

/// Removes invalid characters, normalizes, collapses horizontal whitespace,
/// trims lines and drops blank and boilerplate lines. Idempotent.
pub fn clean(mut doc: RawDocument, cleaner: &Cleaner) -> (RawDocument, CleanCounts) {
    let mut counts = CleanCounts::default();
    let valid: String = doc
        .text
        .chars()
        .filter(|&c| {
            let bad = is_invalid(c);
            counts.invalid_chars += bad as usize;
            !bad
        })
        .collect();
    let normalized = cleaner.normalizer.normalize(&valid);
    counts.control_chars = normalized.controls_removed;

    let mut out = String::with_capacity(normalized.text.len());
    for line in normalized.text.split('\n') {
        let line = collapse_spaces(line);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if cleaner.boilerplate.iter().any(|re| re.is_match(line)) {
            counts.boilerplate_lines += 1;
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(line);
    }
    doc.text = out;
    (doc, counts)
}

fn collapse_spaces(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_run = false;
    for c in line.chars() {
        if c.is_whitespace() {
            if !in_run {
                out.push(' ');
            }
            in_run = true;
        } else {
            out.push(c);
            in_run = false;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DedupCounts {
    pub duplicate_docs: usize,
    pub duplicate_paragraphs: usize,
    /// Documents dropped because every paragraph was a duplicate.
    pub emptied_docs: usize,
}

fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

/// Exact deduplication by text hash; the first occurrence wins and order is
/// otherwise preserved. With `paragraphs`, repeated lines are also removed
/// across the whole stream.
pub fn dedup(docs: Vec<RawDocument>, paragraphs: bool) -> (Vec<RawDocument>, DedupCounts) {
    let hashes: Vec<[u8; 32]> = docs.par_iter().map(|d| digest(&d.text)).collect();
    let mut counts = DedupCounts::default();
    let mut seen_docs = HashSet::new();
    let mut seen_paras = HashSet::new();
    let mut out = Vec::with_capacity(docs.len());
    for (mut doc, h) in docs.into_iter().zip(hashes) {
        if !seen_docs.insert(h) {
            counts.duplicate_docs += 1;
            continue;
        }
        if paragraphs {
            let kept: Vec<&str> = doc
                .text
                .split('\n')
                .filter(|p| {
                    let fresh = seen_paras.insert(digest(p));
                    counts.duplicate_paragraphs += !fresh as usize;
                    fresh
                })
                .collect();
            if kept.is_empty() {
                counts.emptied_docs += 1;
                continue;
            }
            doc.text = kept.join("\n");
        }
        out.push(doc);
    }
    (out, counts)
}
