//! Offline generator for running the pipeline without a model endpoint.
//!
//! It recognizes the three prompt kinds by their template prefixes:
//! expansion prompts get rephrasings of the example instruction, reverse
//! prompts get instructions from a fixed per-task pool, and answer prompts
//! get the reference output of the pair whose input ends the prompt. A
//! seeded fraction of instructions receives degraded answers so that pilot
//! scores differ.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::pairs::IOPair;
use super::pilot::seeded_rng;
use crate::client::MockChatClient;
use crate::formats::Task;
use crate::prompt::TemplateSet;

const PREFIXES: &[&str] = &[
    "Please ",
    "Read the passage carefully. ",
    "As a scholar of Classical Chinese, ",
    "请完成以下任务：",
    "Task: ",
];

fn pool(task: Task) -> &'static [&'static str] {
    match task {
        Task::Ner => &[
            "Identify all characters, place, time, and official positions in the following Classical Chinese text and return 'characters': [...], 'place': [...], 'time': [...], 'official positions': [...].",
            "找出下面古文中的人物、地点、时间和官职，并按照 'characters': [...], 'place': [...], 'time': [...], 'official positions': [...] 的格式输出。",
            "List the named entities of the passage in JSON format with keys characters, place, time and official positions.",
            "Tell me about the people in this passage.",
        ],
        Task::Pos => &[
            "Segment the sentence into words and give each word its part of speech as word/tag pairs.",
            "请对下列文言文进行分词并标注词性，输出格式为 词/词性 ，以空格分隔。",
            "Explain the grammar of this sentence.",
        ],
        Task::Punctuation => &[
            "Add punctuation marks to the following unpunctuated Classical Chinese text.",
            "请为下面的古文加上标点符号。",
            "Rewrite this text.",
        ],
        Task::Translation => &[
            "Translate the following Classical Chinese into modern Chinese.",
            "请把下面的文言文翻译成现代汉语。",
        ],
        Task::WordExplanation => &[
            "Explain the meaning of the word in the given line.",
            "请解释下面句子中指定词语的含义。",
        ],
        Task::ReverseDictionary => &[
            "Give the Classical Chinese word that matches the following description.",
            "根据下面的释义，写出对应的古汉语词语。",
        ],
        Task::Other => &["Answer the question about the following text."],
    }
}

fn prefix(templates: &TemplateSet, name: &str) -> String {
    let text = &templates.get(name).expect("built-in template").text;
    text[..text.find('{').unwrap_or(text.len())].to_owned()
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// First sentence of an instruction, which usually drops the format part.
fn truncated(instruction: &str) -> String {
    let cut = instruction
        .find(['，', ','])
        .unwrap_or(instruction.len());
    instruction[..cut].to_owned()
}

fn degrade(task: Task, gold: &str) -> String {
    match task {
        Task::Ner => "这段文字里有几个人名和地名。".to_owned(),
        _ => {
            let chars: Vec<char> = gold.chars().collect();
            chars[..chars.len().div_ceil(2)].iter().collect()
        }
    }
}

/// Guesses the task an instruction asks for from its wording.
fn task_cue(instruction: &str) -> Option<Task> {
    let lower = instruction.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    if has(&["characters", "official", "entit", "人物", "官职"]) {
        Some(Task::Ner)
    } else if has(&["part of speech", "词性", "/tag"]) {
        Some(Task::Pos)
    } else if has(&["punctuat", "标点"]) {
        Some(Task::Punctuation)
    } else if has(&["translat", "翻译"]) {
        Some(Task::Translation)
    } else if has(&["explain", "explanation", "解释"]) {
        Some(Task::WordExplanation)
    } else if has(&["description", "reverse dictionary", "single word", "释义"]) {
        Some(Task::ReverseDictionary)
    } else {
        None
    }
}

pub fn mock_generator(name: &str, pairs: &[IOPair], templates: &TemplateSet, seed: u64) -> MockChatClient {
    let mut by_input: HashMap<String, Vec<(Task, String)>> = HashMap::new();
    for p in pairs {
        by_input
            .entry(p.input.clone())
            .or_default()
            .push((p.task, p.output.clone()));
    }
    let expand = [prefix(templates, "expand_ner"), prefix(templates, "expand_generic")];
    let reverse = [prefix(templates, "reverse_ner"), prefix(templates, "reverse_generic")];
    MockChatClient::new(name, move |req| {
        let prompt = req.prompt();
        let mut rng = seeded_rng(seed, prompt);
        if expand.iter().any(|p| !p.is_empty() && prompt.starts_with(p.as_str())) {
            let example = prompt
                .rsplit_once("Example instruction: ")
                .map_or(prompt, |(_, e)| e)
                .trim();
            let mut items: Vec<String> = PREFIXES
                .choose_multiple(&mut rng, 3)
                .map(|p| format!("{p}{example}"))
                .collect();
            items.push(truncated(example));
            return Ok(numbered(&items));
        }
        if reverse.iter().any(|p| !p.is_empty() && prompt.starts_with(p.as_str())) {
            let input = prompt
                .split_once("Input: ")
                .and_then(|(_, r)| r.split_once("\n\nOutput: "))
                .map(|(i, _)| i.trim());
            let task = input
                .and_then(|i| by_input.get(i))
                .and_then(|found| {
                    let cue = task_cue(prompt.split_once("Input: ").map_or(prompt, |(head, _)| head));
                    found.iter().find(|(t, _)| Some(*t) == cue).or(found.first())
                })
                .map_or(Task::Other, |(t, _)| *t);
            let items: Vec<String> = pool(task)
                .choose_multiple(&mut rng, 2)
                .map(|s| s.to_string())
                .collect();
            return Ok(format!("Answer:\n\n{}", numbered(&items)));
        }
        let (instruction, input) = prompt.rsplit_once('\n').unwrap_or(("", prompt));
        let found = by_input.get(input).and_then(|found| {
            let cue = task_cue(instruction);
            found.iter().find(|(t, _)| Some(*t) == cue).or(found.first())
        });
        match found {
            Some((task, gold)) => {
                let weak = seeded_rng(seed, instruction).random_ratio(1, 4);
                Ok(if weak { degrade(*task, gold) } else { gold.clone() })
            }
            None => Ok(String::new()),
        }
    })
}
