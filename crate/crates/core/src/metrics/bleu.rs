//! Character-level BLEU-1..4.
//!
//! CJK characters and punctuation are one token each; runs of other letters
//! and digits form a single token; whitespace only separates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::textnorm::is_cjk_ideograph;

pub const MAX_ORDER: usize = 4;

pub fn bleu_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut run, &mut tokens);
        } else if c.is_alphanumeric() && !is_cjk_ideograph(c) && !is_wide(c) {
            run.push(c);
        } else {
            flush(&mut run, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut run, &mut tokens);
    tokens
}

fn flush(run: &mut String, tokens: &mut Vec<String>) {
    if !run.is_empty() {
        tokens.push(std::mem::take(run));
    }
}

/// Kana, Hangul and full-width forms count as single-character tokens.
fn is_wide(c: char) -> bool {
    matches!(c as u32, 0x3040..=0x30FF | 0xAC00..=0xD7AF | 0xFF00..=0xFFEF)
}

/// BLEU values with the counts they were computed from, so sentence scores
/// can be pooled into corpus scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScores {
    /// BLEU-1 through BLEU-4.
    pub bleu: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
    /// Clipped n-gram matches per order.
    pub matches: [usize; MAX_ORDER],
    /// Candidate n-gram totals per order.
    pub totals: [usize; MAX_ORDER],
}

impl BleuScores {
    /// `n` in 1..=4.
    pub fn bleu_n(&self, n: usize) -> f64 {
        self.bleu[n - 1]
    }

    /// Recomputes scores from pooled counts. With `smooth`, orders above 1
    /// whose precision would be zero use add-one counts.
    pub fn from_counts(
        matches: [usize; MAX_ORDER],
        totals: [usize; MAX_ORDER],
        candidate_len: usize,
        reference_len: usize,
        smooth: bool,
    ) -> Self {
        let brevity_penalty = if candidate_len == 0 {
            0.0
        } else if candidate_len < reference_len {
            (1.0 - reference_len as f64 / candidate_len as f64).exp()
        } else {
            1.0
        };
        let mut bleu = [0.0; MAX_ORDER];
        let mut log_sum = 0.0;
        let mut dead = false;
        for k in 0..MAX_ORDER {
            let (m, t) = (matches[k], totals[k]);
            let p = if m > 0 {
                m as f64 / t as f64
            } else if smooth && k > 0 {
                1.0 / (t as f64 + 1.0)
            } else {
                0.0
            };
            if p == 0.0 {
                dead = true;
            }
            if !dead {
                log_sum += p.ln();
                bleu[k] = brevity_penalty * (log_sum / (k + 1) as f64).exp();
            }
        }
        Self {
            bleu,
            brevity_penalty,
            candidate_len,
            reference_len,
            matches,
            totals,
        }
    }

    /// True when every n-gram precision is no larger than the one below it,
    /// the condition under which BLEU-n is non-increasing in n.
    pub fn precisions_non_increasing(&self) -> bool {
        let p: Vec<f64> = (0..MAX_ORDER)
            .map(|k| {
                if self.totals[k] == 0 {
                    0.0
                } else {
                    self.matches[k] as f64 / self.totals[k] as f64
                }
            })
            .collect();
        p.windows(2).all(|w| w[1] <= w[0])
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for gram in tokens.windows(n) {
        *m.entry(gram).or_insert(0) += 1;
    }
    m
}

fn clipped(cand: &[String], refr: &[String]) -> ([usize; MAX_ORDER], [usize; MAX_ORDER]) {
    let mut matches = [0; MAX_ORDER];
    let mut totals = [0; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(refr, n);
        matches[n - 1] = c
            .iter()
            .map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0)))
            .sum();
        totals[n - 1] = cand.len().saturating_sub(n - 1);
    }
    (matches, totals)
}

/// Sentence-level BLEU with add-one smoothing for zero higher-order counts.
pub fn bleu(candidate: &str, reference: &str) -> Result<BleuScores, MetricsError> {
    let cand = bleu_tokens(candidate);
    let refr = bleu_tokens(reference);
    if cand.is_empty() || refr.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (matches, totals) = clipped(&cand, &refr);
    Ok(BleuScores::from_counts(
        matches,
        totals,
        cand.len(),
        refr.len(),
        true,
    ))
}

/// Unsmoothed corpus BLEU over pooled counts.
pub fn corpus_bleu<'a>(
    items: impl IntoIterator<Item = &'a BleuScores>,
) -> Result<BleuScores, MetricsError> {
    let mut matches = [0; MAX_ORDER];
    let mut totals = [0; MAX_ORDER];
    let (mut c, mut r, mut any) = (0, 0, false);
    for s in items {
        any = true;
        for k in 0..MAX_ORDER {
            matches[k] += s.matches[k];
            totals[k] += s.totals[k];
        }
        c += s.candidate_len;
        r += s.reference_len;
    }
    if !any {
        return Err(MetricsError::EmptyList);
    }
    Ok(BleuScores::from_counts(matches, totals, c, r, false))
}
