//! Routing each task to its metric and aggregating per task.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extract::{Extractor, Prediction};
use super::items::{Gold, TaskItem};
use super::run::ModelResponse;
use crate::formats::Task;
use crate::metrics::{
    aggregate, bleu, embed_score, prf_entities_with, prf_pos_with, prf_punct_with, BleuScores,
    EmbedScore, EmbeddingProvider, EntityMatching, ItemMetrics, MetricReport, MetricsError,
    PosMatching, PunctOptions, MAX_BLEU_ORDER,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    pub punct: PunctOptions,
    pub entity_matching: EntityMatching,
    pub pos_matching: PosMatching,
}

/// Everything needed to score predictions.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub extractor: &'a Extractor,
    /// Required for reverse-dictionary items; without one they are unscored.
    pub embedder: Option<&'a dyn EmbeddingProvider>,
    pub options: ScoreOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemScore {
    pub metrics: Option<ItemMetrics>,
    /// The task's headline number for this item.
    pub score: Option<f64>,
    pub base_mismatch: bool,
    pub error: Option<String>,
}

fn zero_bleu(reference: &str) -> BleuScores {
    let r = crate::metrics::bleu_tokens(reference).len();
    BleuScores::from_counts([0; MAX_BLEU_ORDER], [0; MAX_BLEU_ORDER], 0, r, true)
}

impl Scorer<'_> {
    pub fn score(&self, task: Task, gold: &Gold, pred: &Prediction) -> ItemScore {
        let ok = |m: ItemMetrics, score: f64| ItemScore {
            metrics: Some(m),
            score: Some(score),
            base_mismatch: false,
            error: None,
        };
        match (gold, pred) {
            (Gold::Tags(g), Prediction::Tags(p)) => {
                let b = prf_pos_with(g, p, self.options.pos_matching);
                let f1 = b.item_prf().f1;
                ok(ItemMetrics::Prf(b), f1)
            }
            (Gold::Entities(g), Prediction::Entities(p)) => {
                let b = prf_entities_with(g, p, self.options.entity_matching);
                let f1 = b.item_prf().f1;
                ok(ItemMetrics::Prf(b), f1)
            }
            (Gold::Text(g), Prediction::Text(p)) if task == Task::Punctuation => {
                let s = prf_punct_with(g, p, self.extractor.inventory(), self.options.punct);
                let f1 = s.breakdown.item_prf().f1;
                ItemScore {
                    base_mismatch: s.base_mismatch,
                    ..ok(ItemMetrics::Prf(s.breakdown), f1)
                }
            }
            (Gold::Text(g), Prediction::Text(p)) if task == Task::ReverseDictionary => {
                let Some(embedder) = self.embedder else {
                    return unscored("no embedding provider configured".into());
                };
                if p.trim().is_empty() {
                    return ok(ItemMetrics::Embed(EmbedScore::default()), 0.0);
                }
                match embed_score(p, g, embedder) {
                    Ok(s) => ok(ItemMetrics::Embed(s), s.f1),
                    Err(e) => unscored(e.to_string()),
                }
            }
            (Gold::Text(g), Prediction::Text(p)) => match bleu(p, g) {
                Ok(s) => {
                    let b1 = s.bleu[0];
                    ok(ItemMetrics::Bleu(s), b1)
                }
                Err(MetricsError::EmptyInput) => ok(ItemMetrics::Bleu(zero_bleu(g)), 0.0),
                Err(e) => unscored(e.to_string()),
            },
            _ => unscored(format!("prediction does not match the gold type for {task}")),
        }
    }
}

fn unscored(error: String) -> ItemScore {
    ItemScore {
        metrics: None,
        score: None,
        base_mismatch: false,
        error: Some(error),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub task: Task,
    pub prediction: String,
    pub unanswered: bool,
    pub extraction_failed: bool,
    pub base_mismatch: bool,
    /// Excluded from aggregates, e.g. because the embedding provider failed.
    pub unscored: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ItemMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub items: usize,
    pub scored: usize,
    pub unscored: usize,
    pub unanswered: usize,
    pub extraction_failed: usize,
    pub base_mismatches: usize,
    /// F1, BLEU-1 or embedding F1 depending on the task.
    pub headline: Option<f64>,
    pub metrics: Option<MetricReport>,
}

/// Headline number of a task aggregate: micro F1 for the labeling tasks,
/// corpus BLEU-1 for translation and word explanation, mean embedding F1
/// for reverse dictionary.
pub fn headline(report: &MetricReport) -> f64 {
    if let Some(p) = report.prf() {
        p.micro.f1
    } else if let Some(b) = report.bleu() {
        b.corpus.bleu[0]
    } else {
        report.embed().map_or(0.0, |e| e.mean.f1)
    }
}

/// Results of one model on one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub model: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub items: Vec<ItemResult>,
    pub tasks: BTreeMap<Task, TaskSummary>,
}

impl EvalRun {
    /// Rebuilds the per-task aggregates from the per-item results.
    pub fn recompute_tasks(&self) -> BTreeMap<Task, TaskSummary> {
        summarize_tasks(&self.items)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("eval runs serialize");
        s.push('\n');
        s
    }
}

pub fn summarize_tasks(items: &[ItemResult]) -> BTreeMap<Task, TaskSummary> {
    let mut by_task: BTreeMap<Task, Vec<&ItemResult>> = BTreeMap::new();
    for it in items {
        by_task.entry(it.task).or_default().push(it);
    }
    by_task
        .into_iter()
        .map(|(task, its)| {
            let scored: Vec<&ItemMetrics> = its.iter().filter_map(|i| i.metrics.as_ref()).collect();
            let metrics = if scored.is_empty() {
                None
            } else {
                aggregate(scored.iter().copied()).ok()
            };
            let summary = TaskSummary {
                items: its.len(),
                scored: scored.len(),
                unscored: its.iter().filter(|i| i.unscored).count(),
                unanswered: its.iter().filter(|i| i.unanswered).count(),
                extraction_failed: its.iter().filter(|i| i.extraction_failed).count(),
                base_mismatches: its.iter().filter(|i| i.base_mismatch).count(),
                headline: metrics.as_ref().map(headline),
                metrics,
            };
            (task, summary)
        })
        .collect()
}

pub fn evaluate(
    model: &str,
    items: &[TaskItem],
    responses: &[ModelResponse],
    scorer: &Scorer<'_>,
    seed: u64,
    config: serde_json::Value,
) -> EvalRun {
    let by_id: HashMap<&str, &ModelResponse> =
        responses.iter().map(|r| (r.id.as_str(), r)).collect();
    let results: Vec<ItemResult> = items
        .par_iter()
        .map(|item| {
            let content = by_id.get(item.id.as_str()).and_then(|r| r.content.as_deref());
            let (extraction, unanswered) = match content {
                Some(text) => (scorer.extractor.extract(item.task, text), false),
                None => (
                    super::extract::Extraction {
                        prediction: Prediction::empty(item.task),
                        failed: true,
                    },
                    true,
                ),
            };
            let s = scorer.score(item.task, &item.gold, &extraction.prediction);
            ItemResult {
                id: item.id.clone(),
                task: item.task,
                prediction: extraction.prediction.render(),
                unanswered,
                extraction_failed: extraction.failed && !unanswered,
                base_mismatch: s.base_mismatch,
                unscored: s.metrics.is_none(),
                score: s.score,
                metrics: s.metrics,
                error: s.error,
            }
        })
        .collect();
    EvalRun {
        model: model.to_owned(),
        seed,
        config,
        tasks: summarize_tasks(&results),
        items: results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::items::parse_item;
    use crate::metrics::MockEmbeddingProvider;

    const GOLD: &str = "四年/t 春/n ，/w 衞州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";
    const DEEPSEEK: &str = "四/m 年/t 春/t ，/w 衞/ns 州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";

    fn pos_item(id: &str) -> TaskItem {
        parse_item(&format!(
            r#"{{"id":"{id}","task":"pos","instruction":"标注","input":"四年春，衞州吁弑桓公而立。","gold":"{GOLD}"}}"#
        ))
        .unwrap()
    }

    fn answer(id: &str, text: Option<&str>) -> ModelResponse {
        ModelResponse {
            id: id.into(),
            content: text.map(Into::into),
            attempts: 1,
            latency_ms: 0,
            cached: false,
            error: None,
        }
    }

    fn run(items: &[TaskItem], responses: &[ModelResponse], embedder: Option<&dyn EmbeddingProvider>) -> EvalRun {
        let ex = Extractor::default();
        let scorer = Scorer {
            extractor: &ex,
            embedder,
            options: ScoreOptions::default(),
        };
        evaluate("m", items, responses, &scorer, 1, serde_json::Value::Null)
    }

    #[test]
    fn pos_scores() {
        let items = [pos_item("a"), pos_item("b")];
        let r = run(&items, &[answer("a", Some(GOLD)), answer("b", Some(DEEPSEEK))], None);
        assert_eq!(r.items[0].score, Some(1.0));
        assert!((r.items[1].score.unwrap() - 0.6).abs() < 1e-12);
        let micro = r.tasks[&Task::Pos].metrics.as_ref().unwrap().prf().unwrap().micro;
        assert_eq!((micro.true_positives, micro.predicted, micro.gold), (15, 20, 18));
    }

    #[test]
    fn unanswered_counts_as_empty() {
        let items = [pos_item("a")];
        let r = run(&items, &[answer("a", None)], None);
        assert!(r.items[0].unanswered);
        assert_eq!(r.items[0].score, Some(0.0));
        assert_eq!(r.tasks[&Task::Pos].unanswered, 1);
        assert_eq!(r.tasks[&Task::Pos].scored, 1);
    }

    #[test]
    fn reverse_dictionary_identity_and_unscored() {
        let item = parse_item(
            r#"{"id":"r","task":"reverse_dictionary","instruction":"词","input":"形容海棠花的色泽","gold":"晕红"}"#,
        )
        .unwrap();
        let mock = MockEmbeddingProvider::new(8);
        let r = run(std::slice::from_ref(&item), &[answer("r", Some("晕红"))], Some(&mock));
        assert_eq!(r.items[0].score, Some(1.0));
        let r = run(&[item], &[answer("r", Some("晕红"))], None);
        assert!(r.items[0].unscored);
        assert_eq!(r.tasks[&Task::ReverseDictionary].unscored, 1);
        assert_eq!(r.tasks[&Task::ReverseDictionary].metrics, None);
    }

    #[test]
    fn translation_empty_answer_scores_zero() {
        let item = parse_item(
            r#"{"id":"t","task":"translation","instruction":"译","input":"学而时习之","gold":"学了又按时温习"}"#,
        )
        .unwrap();
        let r = run(&[item], &[answer("t", Some("  "))], None);
        assert!(r.items[0].extraction_failed);
        assert_eq!(r.items[0].score, Some(0.0));
        assert_eq!(r.tasks[&Task::Translation].headline, Some(0.0));
    }

    #[test]
    fn aggregates_survive_json_round_trip() {
        let items = [pos_item("a"), pos_item("b")];
        let r = run(&items, &[answer("a", Some(GOLD)), answer("b", Some(DEEPSEEK))], None);
        let back: EvalRun = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.recompute_tasks(), r.tasks);
    }
}
