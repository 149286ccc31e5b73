//! Pilot testing: run each accepted instruction on a sample of pairs and
//! rank instructions by how well the answers score.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::candidates::{ClientOptions, InstructionCandidate};
use super::pairs::IOPair;
use crate::bench::items::parse_gold;
use crate::bench::Scorer;
use crate::client::{fan_out, ChatClient};
use crate::formats::Task;
use crate::prompt::TemplateSet;

pub const DEFAULT_PILOT_SAMPLE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotScore {
    pub id: String,
    pub task: Task,
    pub text: String,
    pub samples: usize,
    /// Mean item score over the scored samples; 0 when none were scored.
    pub mean_score: f64,
    /// Samples that could not be scored (client failure, unusable gold).
    pub unscored: usize,
}

pub(crate) fn seeded_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Up to `n` pairs of `task`, drawn without replacement with a generator
/// seeded by `seed` and `key`, in their original order.
pub fn sample_pairs<'a>(pairs: &'a [IOPair], task: Task, n: usize, seed: u64, key: &str) -> Vec<&'a IOPair> {
    let pool: Vec<(usize, &IOPair)> = pairs.iter().enumerate().filter(|(_, p)| p.task == task).collect();
    let mut rng = seeded_rng(seed, key);
    let mut picked: Vec<(usize, &IOPair)> = pool.choose_multiple(&mut rng, n).copied().collect();
    picked.sort_by_key(|(i, _)| *i);
    picked.into_iter().map(|(_, p)| p).collect()
}

/// Scores every instruction on its own sample. Unparseable answers count
/// as empty predictions and score 0. Reverse-dictionary answers fall back
/// to BLEU-1 when the scorer has no embedding provider.
///
/// Results are ranked by mean score, best first, ties broken by id.
#[allow(clippy::too_many_arguments)]
pub fn pilot_test(
    accepted: &[InstructionCandidate],
    pairs: &[IOPair],
    client: &dyn ChatClient,
    scorer: &Scorer<'_>,
    templates: &TemplateSet,
    opts: &ClientOptions,
    sample_size: usize,
    seed: u64,
) -> Vec<PilotScore> {
    let jobs: Vec<(usize, &IOPair)> = accepted
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            sample_pairs(pairs, c.task, sample_size, seed, &c.id)
                .into_iter()
                .map(move |p| (i, p))
        })
        .collect();
    let outcomes = fan_out(&jobs, opts.parallelism, |&(i, pair)| {
        let c = &accepted[i];
        let prompt = templates.answer_prompt(&c.text, &pair.input);
        let response = match opts.ask(client, &prompt) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("pilot {} on {}: {e}", c.id, pair.id);
                return (i, None);
            }
        };
        let Ok(gold) = parse_gold(c.task, serde_json::Value::String(pair.output.clone())) else {
            return (i, None);
        };
        let task = if c.task == Task::ReverseDictionary && scorer.embedder.is_none() {
            Task::Translation
        } else {
            c.task
        };
        let pred = scorer.extractor.extract(c.task, &response).prediction;
        (i, scorer.score(task, &gold, &pred).score)
    });
    let mut sums = vec![(0usize, 0usize, 0.0f64); accepted.len()];
    for (i, score) in outcomes {
        let s = &mut sums[i];
        s.0 += 1;
        match score {
            Some(v) => s.2 += v,
            None => s.1 += 1,
        }
    }
    let mut out: Vec<PilotScore> = accepted
        .iter()
        .zip(sums)
        .map(|(c, (samples, unscored, total))| {
            let scored = samples - unscored;
            PilotScore {
                id: c.id.clone(),
                task: c.task,
                text: c.text.clone(),
                samples,
                mean_score: if scored == 0 { 0.0 } else { total / scored as f64 },
                unscored,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_score
            .partial_cmp(&a.mean_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    out
}
