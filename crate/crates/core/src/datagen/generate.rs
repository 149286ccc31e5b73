//! Answer generation for (instruction, input) jobs and integration of
//! record sets into the final dataset.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::candidates::{ClientOptions, InstructionCandidate};
use super::pairs::{validate_output, IOPair};
use super::DatagenError;
use crate::bench::Extractor;
use crate::client::{fan_out, ChatClient};
use crate::formats::{InstructionRecord, Stage, Task};
use crate::prompt::TemplateSet;

/// A generated answer that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub instruction_id: String,
    pub pair_id: String,
    pub reason: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Answers {
    pub records: Vec<InstructionRecord>,
    pub rejects: Vec<Reject>,
}

/// Pairs every input with one instruction of its task, cycling through
/// the instructions in order. Inputs of tasks without instructions are
/// skipped.
pub fn assign_instructions<'a>(
    instructions: &'a [InstructionCandidate],
    pairs: &'a [IOPair],
) -> Vec<(&'a InstructionCandidate, &'a IOPair)> {
    let mut next: BTreeMap<Task, usize> = BTreeMap::new();
    pairs
        .iter()
        .filter_map(|p| {
            let of_task: Vec<&InstructionCandidate> =
                instructions.iter().filter(|c| c.task == p.task).collect();
            if of_task.is_empty() {
                return None;
            }
            let k = next.entry(p.task).or_insert(0);
            let c = of_task[*k % of_task.len()];
            *k += 1;
            Some((c, p))
        })
        .collect()
}

/// Queries the model for every job and keeps answers that parse under the
/// task format. Structured answers are stored in canonical form.
pub fn generate_answers(
    jobs: &[(&InstructionCandidate, &IOPair)],
    client: &dyn ChatClient,
    extractor: &Extractor,
    templates: &TemplateSet,
    opts: &ClientOptions,
) -> Result<Answers, DatagenError> {
    let results = fan_out(jobs, opts.parallelism, |(c, pair)| {
        let prompt = templates.answer_prompt(&c.text, &pair.input);
        let response = opts.ask(client, &prompt).map_err(|e| DatagenError::Client {
            context: format!("{} on {}", c.id, pair.id),
            message: e.to_string(),
        })?;
        let extraction = extractor.extract(c.task, &response);
        let output = extraction.prediction.render();
        let checked = if extraction.failed {
            Err("no answer in the expected format".to_owned())
        } else {
            validate_output(c.task, &pair.input, &output, extractor.aliases())
        };
        Ok(match checked {
            Ok(()) => Ok(InstructionRecord {
                instruction: c.text.clone(),
                input: pair.input.clone(),
                output,
                task: c.task,
                source: pair.source.clone(),
                stage: Stage::Generated,
            }),
            Err(reason) => Err(Reject {
                instruction_id: c.id.clone(),
                pair_id: pair.id.clone(),
                reason,
                response,
            }),
        })
    });
    let mut out = Answers::default();
    for r in results {
        match r? {
            Ok(rec) => out.records.push(rec),
            Err(rej) => out.rejects.push(rej),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub source: String,
    pub task: Task,
    pub count: usize,
}

/// Record counts per (source, task).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub rows: Vec<StatsRow>,
    pub per_task: BTreeMap<Task, usize>,
    pub total: usize,
}

impl DatasetStats {
    pub fn of(records: &[InstructionRecord]) -> Self {
        let mut by: BTreeMap<(String, Task), usize> = BTreeMap::new();
        let mut per_task = BTreeMap::new();
        for r in records {
            *by.entry((r.source.clone(), r.task)).or_insert(0) += 1;
            *per_task.entry(r.task).or_insert(0) += 1;
        }
        Self {
            rows: by
                .into_iter()
                .map(|((source, task), count)| StatsRow { source, task, count })
                .collect(),
            per_task,
            total: records.len(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("source\ttask\tcount\n");
        for r in &self.rows {
            writeln!(out, "{}\t{}\t{}", r.source, r.task, r.count).unwrap();
        }
        writeln!(out, "total\t\t{}", self.total).unwrap();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Integrated {
    pub records: Vec<InstructionRecord>,
    pub duplicates: usize,
    pub stats: DatasetStats,
}

/// Concatenates record sets, drops repeated (instruction, input) pairs
/// keeping the first, and re-validates every record. The first invalid
/// record aborts with its id, `<set>:<index>` (both 0-based).
pub fn integrate(
    sets: &[&[InstructionRecord]],
    extractor: &Extractor,
) -> Result<Integrated, DatagenError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut duplicates = 0;
    for (s, set) in sets.iter().enumerate() {
        for (i, r) in set.iter().enumerate() {
            let invalid = |reason: String| DatagenError::InvalidRecord {
                id: format!("{s}:{i}"),
                reason,
            };
            r.check().map_err(invalid)?;
            if r.task != Task::Other {
                let input = if r.input.is_empty() { &r.instruction } else { &r.input };
                validate_output(r.task, input, &r.output, extractor.aliases()).map_err(invalid)?;
            } else if r.output.trim().is_empty() {
                return Err(invalid("empty output".into()));
            }
            if !seen.insert((r.instruction.clone(), r.input.clone())) {
                duplicates += 1;
                continue;
            }
            records.push(InstructionRecord {
                stage: Stage::Integrated,
                ..r.clone()
            });
        }
    }
    let stats = DatasetStats::of(&records);
    Ok(Integrated {
        records,
        duplicates,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{MockChatClient, RetryPolicy};

    const ACCEPT_OUT: &str = "'characters': [], 'place': ['许州'], 'time': ['天成初'], 'official positions': ['同平章事']";

    fn ner_pair() -> IOPair {
        IOPair {
            id: "n:1".into(),
            input: "天成初，移镇许州，加同平章事。".into(),
            output: ACCEPT_OUT.into(),
            task: Task::Ner,
            source: "n".into(),
        }
    }

    fn opts() -> ClientOptions {
        ClientOptions {
            retry: RetryPolicy::no_wait(1),
            ..Default::default()
        }
    }

    fn generate(answer: &'static str) -> Answers {
        let c = InstructionCandidate::manual("i", Task::Ner, "Extract characters, place, time, and official positions.");
        let p = ner_pair();
        let client = MockChatClient::new("m", move |_| Ok(answer.into()));
        generate_answers(&[(&c, &p)], &client, &Extractor::default(), &TemplateSet::builtin(), &opts()).unwrap()
    }

    fn rec(task: Task, instruction: &str, input: &str, output: &str, source: &str) -> InstructionRecord {
        InstructionRecord {
            instruction: instruction.into(),
            input: input.into(),
            output: output.into(),
            task,
            source: source.into(),
            stage: Stage::Generated,
        }
    }

    #[test]
    fn valid_answer_becomes_record() {
        let a = generate(ACCEPT_OUT);
        assert_eq!(a.records.len(), 1);
        assert!(a.rejects.is_empty());
        assert_eq!(a.records[0].output, ACCEPT_OUT);
        assert_eq!(a.records[0].stage, Stage::Generated);
    }

    #[test]
    fn prose_answer_is_rejected() {
        let a = generate("天成初：时间，许州：地点，同平章事：官职。");
        assert!(a.records.is_empty());
        assert_eq!(a.rejects.len(), 1);
        let client = MockChatClient::new("m", |_| Ok("x".into()));
        let none = generate_answers(&[], &client, &Extractor::default(), &TemplateSet::builtin(), &opts()).unwrap();
        assert_eq!(none, Answers::default());
    }

    #[test]
    fn round_robin_assignment() {
        let cs = [
            InstructionCandidate::manual("a", Task::Ner, "x"),
            InstructionCandidate::manual("b", Task::Ner, "y"),
        ];
        let ps = [ner_pair(), ner_pair(), ner_pair()];
        let ids: Vec<&str> = assign_instructions(&cs, &ps).iter().map(|(c, _)| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "a"]);
        let t = IOPair { task: Task::Translation, ..ner_pair() };
        assert!(assign_instructions(&cs, &[t]).is_empty());
    }

    #[test]
    fn integration_dedups_and_counts() {
        let a = vec![
            rec(Task::Punctuation, "加标点", "学而时习之", "学而时习之。", "s1"),
            rec(Task::Translation, "翻译", "学而", "学习", "s1"),
        ];
        let b = vec![
            rec(Task::Translation, "翻译", "学而", "学习了", "s2"),
            rec(Task::Punctuation, "加标点", "温故知新", "温故知新。", "s2"),
        ];
        let ex = Extractor::default();
        let out = integrate(&[&a, &b], &ex).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.duplicates, 1);
        assert_eq!(out.records[1].output, "学习");
        assert!(out.records.iter().all(|r| r.stage == Stage::Integrated));
        assert_eq!(out.stats.per_task[&Task::Punctuation], 2);
        assert_eq!(out.stats.rows.iter().map(|r| r.count).sum::<usize>(), out.stats.total);
        assert!(out.stats.to_tsv().ends_with("total\t\t3\n"));

        let again = integrate(&[&out.records], &ex).unwrap();
        assert_eq!(again.records, out.records);
        assert_eq!(again.stats, out.stats);
    }

    #[test]
    fn invalid_record_aborts_with_id() {
        let a = vec![
            rec(Task::Punctuation, "加标点", "学而时习之", "学而时习之。", "s"),
            rec(Task::Pos, "标注", "四年春", "四年/zz 春/n", "s"),
        ];
        let err = integrate(&[&a], &Extractor::default()).unwrap_err();
        assert!(matches!(err, DatagenError::InvalidRecord { ref id, .. } if id == "0:1"), "{err}");
    }
}
