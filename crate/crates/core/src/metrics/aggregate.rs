//! Corpus-level aggregation of per-item scores.
//!
//! P/R/F1 is micro-averaged (counts summed, ratios recomputed once); BLEU is
//! pooled at the n-gram count level, with the sentence-level mean reported
//! alongside; embedding scores are averaged over items.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::bleu::{corpus_bleu, BleuScores, MAX_ORDER};
use super::embed::EmbedScore;
use super::prf::{Prf, PrfBreakdown};
use super::MetricsError;

/// Score of one benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemMetrics {
    Prf(PrfBreakdown),
    Bleu(BleuScores),
    Embed(EmbedScore),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfSummary {
    pub counts: PrfBreakdown,
    pub micro: Prf,
    pub per_category: BTreeMap<String, Prf>,
}

impl PrfSummary {
    fn from_counts(counts: PrfBreakdown) -> Self {
        Self {
            micro: counts.prf(),
            per_category: counts.category_prf(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuSummary {
    /// Unsmoothed BLEU over pooled counts.
    pub corpus: BleuScores,
    /// Mean of the smoothed sentence-level scores.
    pub sentence_mean: [f64; MAX_ORDER],
    pub sentence_sum: [f64; MAX_ORDER],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub mean: EmbedScore,
    pub sum: EmbedScore,
}

/// Aggregate over a list of items of one kind. Reports can themselves be
/// merged, so aggregating partial reports gives the same counts as
/// aggregating all items at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub items: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summary {
    Prf(PrfSummary),
    Bleu(BleuSummary),
    Embed(EmbedSummary),
}

impl MetricReport {
    pub fn prf(&self) -> Option<&PrfSummary> {
        match &self.summary {
            Summary::Prf(s) => Some(s),
            _ => None,
        }
    }

    pub fn bleu(&self) -> Option<&BleuSummary> {
        match &self.summary {
            Summary::Bleu(s) => Some(s),
            _ => None,
        }
    }

    pub fn embed(&self) -> Option<&EmbedSummary> {
        match &self.summary {
            Summary::Embed(s) => Some(s),
            _ => None,
        }
    }

    pub fn merge(&self, other: &MetricReport) -> Result<MetricReport, MetricsError> {
        let items = self.items + other.items;
        let summary = match (&self.summary, &other.summary) {
            (Summary::Prf(a), Summary::Prf(b)) => {
                let mut counts = a.counts.clone();
                counts.merge(&b.counts);
                Summary::Prf(PrfSummary::from_counts(counts))
            }
            (Summary::Bleu(a), Summary::Bleu(b)) => {
                let corpus = corpus_bleu([&a.corpus, &b.corpus])?;
                let sum = add_arrays(a.sentence_sum, b.sentence_sum);
                Summary::Bleu(BleuSummary {
                    corpus,
                    sentence_mean: sum.map(|s| s / items as f64),
                    sentence_sum: sum,
                })
            }
            (Summary::Embed(a), Summary::Embed(b)) => {
                let sum = EmbedScore {
                    precision: a.sum.precision + b.sum.precision,
                    recall: a.sum.recall + b.sum.recall,
                    f1: a.sum.f1 + b.sum.f1,
                };
                Summary::Embed(embed_summary(sum, items))
            }
            _ => return Err(MetricsError::MixedKinds),
        };
        Ok(MetricReport { items, summary })
    }
}

fn add_arrays(a: [f64; MAX_ORDER], b: [f64; MAX_ORDER]) -> [f64; MAX_ORDER] {
    std::array::from_fn(|k| a[k] + b[k])
}

fn embed_summary(sum: EmbedScore, n: usize) -> EmbedSummary {
    let n = n as f64;
    EmbedSummary {
        mean: EmbedScore {
            precision: sum.precision / n,
            recall: sum.recall / n,
            f1: sum.f1 / n,
        },
        sum,
    }
}

pub fn aggregate<'a>(
    items: impl IntoIterator<Item = &'a ItemMetrics>,
) -> Result<MetricReport, MetricsError> {
    let items: Vec<&ItemMetrics> = items.into_iter().collect();
    let first = items.first().ok_or(MetricsError::EmptyList)?;
    let n = items.len();
    let summary = match first {
        ItemMetrics::Prf(_) => {
            let mut counts = PrfBreakdown::default();
            for it in &items {
                let ItemMetrics::Prf(b) = it else {
                    return Err(MetricsError::MixedKinds);
                };
                counts.merge(b);
            }
            Summary::Prf(PrfSummary::from_counts(counts))
        }
        ItemMetrics::Bleu(_) => {
            let mut scores = Vec::with_capacity(n);
            for it in &items {
                let ItemMetrics::Bleu(b) = it else {
                    return Err(MetricsError::MixedKinds);
                };
                scores.push(b);
            }
            let corpus = corpus_bleu(scores.iter().copied())?;
            let sum = scores
                .iter()
                .fold([0.0; MAX_ORDER], |acc, s| add_arrays(acc, s.bleu));
            Summary::Bleu(BleuSummary {
                corpus,
                sentence_mean: sum.map(|s| s / n as f64),
                sentence_sum: sum,
            })
        }
        ItemMetrics::Embed(_) => {
            let mut sum = EmbedScore::default();
            for it in &items {
                let ItemMetrics::Embed(e) = it else {
                    return Err(MetricsError::MixedKinds);
                };
                sum.precision += e.precision;
                sum.recall += e.recall;
                sum.f1 += e.f1;
            }
            Summary::Embed(embed_summary(sum, n))
        }
    };
    Ok(MetricReport { items: n, summary })
}

/// Merges partial reports, e.g. one per worker chunk.
pub fn aggregate_reports<'a>(
    reports: impl IntoIterator<Item = &'a MetricReport>,
) -> Result<MetricReport, MetricsError> {
    let mut it = reports.into_iter();
    let first = it.next().ok_or(MetricsError::EmptyList)?.clone();
    it.try_fold(first, |acc, r| acc.merge(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{bleu, Counts};
    use proptest::prelude::*;

    fn prf_item(tp: usize, p: usize, g: usize) -> ItemMetrics {
        let mut b = PrfBreakdown {
            counts: Counts::new(tp, p, g),
            ..Default::default()
        };
        b.bump("comma", |c| *c += Counts::new(tp, p, g));
        ItemMetrics::Prf(b)
    }

    #[test]
    fn micro_average_of_two_punctuation_items() {
        let items = [prf_item(1, 1, 2), prf_item(1, 2, 2)];
        let r = aggregate(&items).unwrap();
        let m = r.prf().unwrap().micro;
        assert_eq!((m.true_positives, m.predicted, m.gold), (2, 3, 4));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.prf().unwrap().per_category["comma"].f1, m.f1);
    }

    #[test]
    fn single_item_equals_itself() {
        let item = prf_item(6, 11, 9);
        let r = aggregate([&item]).unwrap();
        assert_eq!(r.prf().unwrap().micro, Counts::new(6, 11, 9).prf());
        let b = bleu::bleu("春眠不晓", "春眠不觉晓").unwrap();
        let r = aggregate(&[ItemMetrics::Bleu(b.clone())]).unwrap();
        assert_eq!(r.bleu().unwrap().sentence_mean, b.bleu);
        assert_eq!(r.bleu().unwrap().corpus.bleu[0], b.bleu[0]);
    }

    #[test]
    fn errors() {
        assert_eq!(aggregate([]).unwrap_err(), MetricsError::EmptyList);
        let e = ItemMetrics::Embed(EmbedScore::default());
        assert_eq!(
            aggregate(&[prf_item(1, 1, 1), e]).unwrap_err(),
            MetricsError::MixedKinds
        );
    }

    #[test]
    fn embed_mean() {
        let items = [
            ItemMetrics::Embed(EmbedScore { precision: 1.0, recall: 0.5, f1: 0.5 }),
            ItemMetrics::Embed(EmbedScore { precision: 0.0, recall: 0.5, f1: 0.25 }),
        ];
        let r = aggregate(&items).unwrap();
        let m = r.embed().unwrap().mean;
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.375));
    }

    proptest! {
        #[test]
        fn chunking_and_order_do_not_change_counts(
            raw in prop::collection::vec((0usize..4, 0usize..4, 0usize..4), 1..30),
            cut in 0usize..30,
        ) {
            let items: Vec<ItemMetrics> = raw
                .iter()
                .map(|&(tp, a, b)| prf_item(tp, tp + a, tp + b))
                .collect();
            let whole = aggregate(&items).unwrap();
            let cut = cut.min(items.len() - 1).max(1).min(items.len());
            let parts: Vec<MetricReport> = items
                .chunks(cut)
                .map(|c| aggregate(c).unwrap())
                .collect();
            prop_assert_eq!(&aggregate_reports(&parts).unwrap(), &whole);
            let mut rev = items.clone();
            rev.reverse();
            prop_assert_eq!(&aggregate(&rev).unwrap(), &whole);
        }

        #[test]
        fn bleu_chunking_keeps_corpus_scores(
            pairs in prop::collection::vec(("[春眠不觉晓处闻啼鸟]{1,8}", "[春眠不觉晓处闻啼鸟]{1,8}"), 1..12),
            cut in 1usize..12,
        ) {
            let items: Vec<ItemMetrics> = pairs
                .iter()
                .map(|(c, r)| ItemMetrics::Bleu(bleu::bleu(c, r).unwrap()))
                .collect();
            let whole = aggregate(&items).unwrap();
            let parts: Vec<MetricReport> = items.chunks(cut).map(|c| aggregate(c).unwrap()).collect();
            let merged = aggregate_reports(&parts).unwrap();
            prop_assert_eq!(&merged.bleu().unwrap().corpus, &whole.bleu().unwrap().corpus);
            for k in 0..MAX_ORDER {
                let d = merged.bleu().unwrap().sentence_mean[k] - whole.bleu().unwrap().sentence_mean[k];
                prop_assert!(d.abs() < 1e-12);
            }
        }
    }
}
