//! Input-output pairs selected from tagged corpora, parallel corpora and
//! question-answer collections.

use serde::{Deserialize, Serialize};

use crate::formats::{
    parse_entity_output_with, parse_slash_tags, serialize_slash_tags, EntityKeyAliases,
    MalformedLine, Task,
};
use crate::textnorm::PunctInventory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IOPair {
    /// `<source>:<line>`, unique within a pipeline run.
    pub id: String,
    pub input: String,
    pub output: String,
    pub task: Task,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairsBuilt {
    pub pairs: Vec<IOPair>,
    pub rejected: Vec<MalformedLine>,
}

/// Checks an output against the task format and against its input.
///
/// Punctuation outputs must restore to the input once marks are removed,
/// POS outputs must spell the input, entities must occur in the input.
/// Free-text tasks only require a non-empty output.
pub fn validate_output(
    task: Task,
    input: &str,
    output: &str,
    aliases: &EntityKeyAliases,
) -> Result<(), String> {
    if input.trim().is_empty() {
        return Err("empty input".into());
    }
    if output.trim().is_empty() {
        return Err("empty output".into());
    }
    match task {
        Task::Punctuation => {
            let inv = PunctInventory::builtin();
            let out = inv.strip(output);
            if out.marks.is_empty() {
                return Err("output has no punctuation".into());
            }
            if out.base_text != inv.strip(input).base_text {
                return Err("output text differs from the input".into());
            }
        }
        Task::Pos => {
            let seq = parse_slash_tags(output, true).map_err(|e| e.to_string())?;
            if seq.text() != input {
                return Err("tagged segments do not spell the input".into());
            }
        }
        Task::Ner => {
            let set = parse_entity_output_with(output, aliases).map_err(|e| e.to_string())?;
            let missing = [&set.characters, &set.place, &set.time, &set.official_positions]
                .into_iter()
                .flatten()
                .find(|e| !input.contains(e.as_str()));
            if let Some(e) = missing {
                return Err(format!("entity {e:?} does not occur in the input"));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Turns one corpus line into a pair.
///
/// Punctuation: a punctuated sentence. POS: a slash-tag line. NER:
/// `text<TAB>entity output`. Other tasks: `input<TAB>output`.
pub fn pair_from_line(
    line: &str,
    task: Task,
    aliases: &EntityKeyAliases,
) -> Result<(String, String), String> {
    let line = line.trim();
    let (input, output) = match task {
        Task::Punctuation => {
            let base = PunctInventory::builtin().strip(line).base_text;
            (base, line.to_owned())
        }
        Task::Pos => {
            let seq = parse_slash_tags(line, true).map_err(|e| e.to_string())?;
            let text = seq.text();
            (text, serialize_slash_tags(&seq).map_err(|e| e.to_string())?)
        }
        Task::Ner => {
            let (text, out) = line.split_once('\t').ok_or("expected text<TAB>entities")?;
            let set = parse_entity_output_with(out, aliases).map_err(|e| e.to_string())?;
            (text.trim().to_owned(), set.to_schema_string())
        }
        _ => {
            let (a, b) = line.split_once('\t').ok_or("expected input<TAB>output")?;
            (a.trim().to_owned(), b.trim().to_owned())
        }
    };
    validate_output(task, &input, &output, aliases)?;
    Ok((input, output))
}

/// Builds pairs from the lines of one source. Blank and `#` lines are
/// skipped; invalid lines are reported with their 1-based number.
pub fn build_pairs(text: &str, task: Task, source: &str, aliases: &EntityKeyAliases) -> PairsBuilt {
    let mut out = PairsBuilt::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match pair_from_line(line, task, aliases) {
            Ok((input, output)) => out.pairs.push(IOPair {
                id: format!("{source}:{}", n + 1),
                input,
                output,
                task,
                source: source.to_owned(),
            }),
            Err(reason) => out.rejected.push(MalformedLine { line: n + 1, reason }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aliases() -> EntityKeyAliases {
        EntityKeyAliases::default()
    }

    #[test]
    fn tagged_line_becomes_pair() {
        let line = "四年/t 春/n ，/w 衞州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";
        let built = build_pairs(line, Task::Pos, "zuozhuan", &aliases());
        assert!(built.rejected.is_empty());
        let p = &built.pairs[0];
        assert_eq!(p.input, "四年春，衞州吁弑桓公而立。");
        assert_eq!(p.output, line);
        assert_eq!(p.id, "zuozhuan:1");
    }

    #[test]
    fn punctuated_sentence_becomes_pair() {
        let built = build_pairs("四年春，衞州吁弑桓公而立。", Task::Punctuation, "s", &aliases());
        let p = &built.pairs[0];
        assert_eq!(p.input, "四年春衞州吁弑桓公而立");
        let ann = PunctInventory::builtin().strip(&p.output);
        assert_eq!(ann.reinsert(), p.output);
    }

    #[test]
    fn bad_lines_are_reported() {
        let text = "四年/t 春/zz\n\n# comment\n立/v";
        let built = build_pairs(text, Task::Pos, "s", &aliases());
        assert_eq!(built.pairs.len(), 1);
        assert_eq!(built.rejected.len(), 1);
        assert_eq!(built.rejected[0].line, 1);
        let built = build_pairs("四年春衞州吁", Task::Punctuation, "s", &aliases());
        assert_eq!(built.rejected.len(), 1);
    }

    #[test]
    fn ner_pairs_are_canonical_and_grounded() {
        let line = "天成初，移镇许州，加同平章事。\t{\"place\": [\"许州\"], \"time\": [\"天成初\"], \"official positions\": [\"同平章事\"]}";
        let built = build_pairs(line, Task::Ner, "s", &aliases());
        assert_eq!(
            built.pairs[0].output,
            "'characters': [], 'place': ['许州'], 'time': ['天成初'], 'official positions': ['同平章事']"
        );
        let bad = "天成初，移镇许州。\t'characters': ['赵承庆'], 'place': [], 'time': [], 'official positions': []";
        assert_eq!(build_pairs(bad, Task::Ner, "s", &aliases()).rejected.len(), 1);
    }

    #[test]
    fn parallel_lines() {
        let built = build_pairs("学而时习之\t学了又按时温习\nonly one side", Task::Translation, "lunyu", &aliases());
        assert_eq!(built.pairs.len(), 1);
        assert_eq!(built.rejected.len(), 1);
    }
}
