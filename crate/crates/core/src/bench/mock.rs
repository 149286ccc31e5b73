//! Offline stand-in models that answer benchmark items with a seeded,
//! degraded copy of the gold answer.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::items::{Gold, TaskItem};
use crate::client::MockChatClient;
use crate::formats::{serialize_slash_tags, PosTag, Tag, TaggedSequence};
use crate::prompt::TemplateSet;
use crate::textnorm::PunctInventory;

fn item_rng(model: &str, id: &str, seed: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0]);
    h.update(id.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// The gold answer with each unit (mark, tag, entity, character) corrupted
/// with probability `noise`. Sometimes prefixed with an answer label, which
/// extraction has to strip.
pub fn noisy_answer(item: &TaskItem, noise: f64, rng: &mut impl Rng) -> String {
    let noise = noise.clamp(0.0, 1.0);
    let body = match &item.gold {
        Gold::Tags(seq) => {
            let items = seq
                .items
                .iter()
                .map(|it| {
                    let mut it = it.clone();
                    if rng.random_bool(noise) {
                        let pick = PosTag::ALL[rng.random_range(0..PosTag::ALL.len())];
                        it.tag = Tag::from(pick);
                    }
                    it
                })
                .collect();
            serialize_slash_tags(&TaggedSequence::new(items)).unwrap_or_default()
        }
        Gold::Entities(set) => {
            let mut out = set.clone();
            for list in [
                &mut out.characters,
                &mut out.place,
                &mut out.time,
                &mut out.official_positions,
            ] {
                list.retain(|_| !rng.random_bool(noise));
            }
            out.to_schema_string()
        }
        Gold::Text(text) if item.task == crate::formats::Task::Punctuation => {
            let inv = PunctInventory::builtin();
            text.chars()
                .filter(|&c| !(inv.contains(c) && rng.random_bool(noise)))
                .collect()
        }
        Gold::Text(text) => text.chars().filter(|_| !rng.random_bool(noise)).collect(),
    };
    if rng.random_bool(noise / 2.0) {
        format!("答案：{body}")
    } else {
        body
    }
}

/// A mock chat client that knows the answer prompt of every item.
pub fn mock_model(
    name: &str,
    items: &[TaskItem],
    templates: &TemplateSet,
    noise: f64,
    seed: u64,
) -> MockChatClient {
    let answers: HashMap<String, String> = items
        .iter()
        .map(|it| {
            let mut rng = item_rng(name, &it.id, seed);
            (
                templates.answer_prompt(&it.instruction, &it.input),
                noisy_answer(it, noise, &mut rng),
            )
        })
        .collect();
    MockChatClient::with_answers(name, answers, "")
}
