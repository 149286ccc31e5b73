//! P/R/F1 for the three understanding tasks.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::prf::{Counts, PrfBreakdown};
use crate::formats::{EntityCategory, EntitySet, Tag, TaggedSequence};
use crate::textnorm::{Mark, PunctInventory};

const UNKNOWN_TAG: &str = "<unknown>";

/// How predicted POS items are matched against gold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosMatching {
    /// Multiset intersection of (segment, tag) pairs; robust to
    /// re-segmentation.
    #[default]
    Multiset,
    /// (start, end, tag) character spans must coincide.
    Span,
}

fn multiset<K: Eq + Hash>(keys: impl IntoIterator<Item = K>) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

pub fn prf_pos(gold: &TaggedSequence, pred: &TaggedSequence) -> PrfBreakdown {
    prf_pos_with(gold, pred, PosMatching::Multiset)
}

pub fn prf_pos_with(gold: &TaggedSequence, pred: &TaggedSequence, mode: PosMatching) -> PrfBreakdown {
    let mut out = PrfBreakdown::default();
    for item in &gold.items {
        out.bump(tag_key(&item.tag), |c| c.gold += 1);
    }
    for item in &pred.items {
        out.bump(tag_key(&item.tag), |c| c.predicted += 1);
    }

    // Unknown tags never match.
    let matches: Vec<(&Tag, usize)> = match mode {
        PosMatching::Multiset => {
            let g = multiset(
                gold.items
                    .iter()
                    .filter(|i| i.tag.known().is_some())
                    .map(|i| (i.segment.as_str(), &i.tag)),
            );
            let p = multiset(
                pred.items
                    .iter()
                    .filter(|i| i.tag.known().is_some())
                    .map(|i| (i.segment.as_str(), &i.tag)),
            );
            g.iter()
                .filter_map(|(k, gc)| p.get(k).map(|pc| (k.1, (*gc).min(*pc))))
                .collect()
        }
        PosMatching::Span => {
            let g = multiset(spans(gold).into_iter().filter(|s| s.2.known().is_some()));
            let p = multiset(spans(pred).into_iter().filter(|s| s.2.known().is_some()));
            g.iter()
                .filter_map(|(k, gc)| p.get(k).map(|pc| (k.2, (*gc).min(*pc))))
                .collect()
        }
    };
    for (tag, n) in matches {
        out.counts.tp += n;
        out.bump(tag_key(tag), |c| c.tp += n);
    }
    out.counts.gold = gold.len();
    out.counts.predicted = pred.len();
    out
}

fn tag_key(tag: &Tag) -> &str {
    match tag {
        Tag::Known(t) => t.code(),
        Tag::Unknown(_) => UNKNOWN_TAG,
    }
}

fn spans(seq: &TaggedSequence) -> Vec<(usize, usize, &Tag)> {
    let mut start = 0;
    seq.items
        .iter()
        .map(|item| {
            let end = start + item.segment.chars().count();
            let span = (start, end, &item.tag);
            start = end;
            span
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PunctOptions {
    /// Drop marks sitting after the last base character on both sides.
    pub ignore_terminal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctScore {
    pub breakdown: PrfBreakdown,
    /// The prediction altered the base characters; marks were matched
    /// through a longest-common-subsequence alignment.
    pub base_mismatch: bool,
}

/// Scores predicted punctuation against gold. Marks match when they share
/// a class and sit at corresponding positions.
pub fn prf_punct(gold_text: &str, pred_text: &str, inventory: &PunctInventory) -> PunctScore {
    prf_punct_with(gold_text, pred_text, inventory, PunctOptions::default())
}

pub fn prf_punct_with(
    gold_text: &str,
    pred_text: &str,
    inventory: &PunctInventory,
    opts: PunctOptions,
) -> PunctScore {
    let gold = inventory.strip(gold_text);
    let pred = inventory.strip(pred_text);
    let gold_base: Vec<char> = gold.base_text.chars().collect();
    let pred_base: Vec<char> = pred.base_text.chars().collect();
    let keep = |marks: &[Mark], len: usize| -> Vec<Mark> {
        marks
            .iter()
            .filter(|m| !(opts.ignore_terminal && m.offset == len))
            .cloned()
            .collect()
    };
    let gold_marks = keep(&gold.marks, gold_base.len());
    let pred_marks = keep(&pred.marks, pred_base.len());

    let base_mismatch = gold_base != pred_base;
    // Gold offset -> pred offset; a mark at offset k hangs off base char k-1,
    // offset 0 hangs off the start of the text.
    let anchor: Box<dyn Fn(usize) -> Option<usize>> = if base_mismatch {
        let aligned = lcs_alignment(&gold_base, &pred_base);
        Box::new(move |k| if k == 0 { Some(0) } else { aligned[k - 1].map(|j| j + 1) })
    } else {
        Box::new(Some)
    };

    let mut out = PrfBreakdown::default();
    for m in &gold_marks {
        out.bump(inventory.class_name(m.class), |c| c.gold += 1);
    }
    for m in &pred_marks {
        out.bump(inventory.class_name(m.class), |c| c.predicted += 1);
    }
    let g = multiset(
        gold_marks
            .iter()
            .filter_map(|m| anchor(m.offset).map(|o| (o, m.class))),
    );
    let p = multiset(pred_marks.iter().map(|m| (m.offset, m.class)));
    let mut matched: Vec<_> = g
        .iter()
        .filter_map(|(k, gc)| p.get(k).map(|pc| (k.1, (*gc).min(*pc))))
        .collect();
    matched.sort();
    for (class, n) in matched {
        out.counts.tp += n;
        out.bump(inventory.class_name(class), |c| c.tp += n);
    }
    out.counts.gold = gold_marks.len();
    out.counts.predicted = pred_marks.len();
    PunctScore {
        breakdown: out,
        base_mismatch,
    }
}

/// For each char of `a`, the index of the char of `b` it is paired with in
/// a longest common subsequence.
pub(crate) fn lcs_alignment(a: &[char], b: &[char]) -> Vec<Option<usize>> {
    let (n, m) = (a.len(), b.len());
    // suffix table: len[i][j] = LCS of a[i..], b[j..]
    let width = m + 1;
    let mut len = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            len[i * width + j] = if a[i] == b[j] {
                len[(i + 1) * width + j + 1] + 1
            } else {
                len[(i + 1) * width + j].max(len[i * width + j + 1])
            };
        }
    }
    let mut out = vec![None; n];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out[i] = Some(j);
            i += 1;
            j += 1;
            continue;
        }
        let skip_a = len[(i + 1) * width + j];
        let skip_b = len[i * width + j + 1];
        // ties break on the chars themselves so that swapping the inputs
        // yields the transposed alignment
        if skip_a > skip_b || (skip_a == skip_b && a[i] < b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// How entity strings are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityMatching {
    #[default]
    Exact,
    /// Ignore whitespace and inventory punctuation inside entity strings.
    Normalized,
}

/// Micro counts over the four categories plus per-category counts.
pub fn prf_entities(gold: &EntitySet, pred: &EntitySet) -> PrfBreakdown {
    prf_entities_with(gold, pred, EntityMatching::Exact)
}

pub fn prf_entities_with(gold: &EntitySet, pred: &EntitySet, mode: EntityMatching) -> PrfBreakdown {
    let inv = PunctInventory::builtin();
    let canon = |s: &String| -> String {
        match mode {
            EntityMatching::Exact => s.clone(),
            EntityMatching::Normalized => s
                .chars()
                .filter(|c| !c.is_whitespace() && !inv.contains(*c))
                .collect(),
        }
    };
    let mut out = PrfBreakdown::default();
    for cat in EntityCategory::ALL {
        let g = multiset(gold.get(cat).iter().map(canon));
        let p = multiset(pred.get(cat).iter().map(canon));
        let tp = g
            .iter()
            .filter_map(|(k, gc)| p.get(k).map(|pc| (*gc).min(*pc)))
            .sum();
        let counts = Counts::new(tp, pred.get(cat).len(), gold.get(cat).len());
        out.per_category.insert(cat.key().to_owned(), counts);
        out.counts += counts;
    }
    out
}
